#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "deepwait/error.hpp"

namespace deepwait {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;

// Per-sample log-risk h_i: the exponent of the proportional-hazards model.
using RiskScores = Eigen::VectorXd;

/**
 * Right-censored survival data. `durations` holds the observed waiting time
 * per sample; `events` is 1 when the event (crossing initiation) was observed
 * at that time and 0 when the sample is censored.
 */
struct SurvivalDataset {
    Matrix features;                         // n_samples x n_features
    std::vector<std::string> feature_names;  // unique, one per column
    Vector durations;                        // strictly positive
    IntVector events;                        // 0 or 1

    Eigen::Index n_samples() const { return durations.size(); }
    Eigen::Index n_features() const { return features.cols(); }

    int n_events() const {
        int c = 0;
        for (Eigen::Index i = 0; i < events.size(); ++i) c += events[i] != 0;
        return c;
    }

    void validate() const {
        const Eigen::Index n = durations.size();
        if (n == 0)
            throw ValidationError("dataset is empty");
        if (features.rows() != n || events.size() != n)
            throw ValidationError("features/durations/events row counts disagree");
        if (static_cast<Eigen::Index>(feature_names.size()) != features.cols())
            throw ValidationError("feature_names length does not match feature column count");
        std::unordered_set<std::string> seen;
        for (const auto& name : feature_names)
            if (!seen.insert(name).second)
                throw ValidationError("duplicate feature name '" + name + "'");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(durations[i]) || durations[i] <= 0.0)
                throw ValidationError("duration at row " + std::to_string(i) +
                                      " is not strictly positive and finite");
            if (events[i] != 0 && events[i] != 1)
                throw ValidationError("event at row " + std::to_string(i) + " is not 0/1");
        }
        if (!features.allFinite())
            throw ValidationError("feature matrix contains non-finite values");
    }
};

inline SurvivalDataset subset_rows(const SurvivalDataset& data, const std::vector<int>& rows) {
    SurvivalDataset out;
    out.feature_names = data.feature_names;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
    out.durations.resize(static_cast<Eigen::Index>(rows.size()));
    out.events.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
        out.durations[static_cast<Eigen::Index>(i)] = data.durations[rows[i]];
        out.events[static_cast<Eigen::Index>(i)] = data.events[rows[i]];
    }
    return out;
}

inline SurvivalDataset subset_features(const SurvivalDataset& data, const std::vector<int>& cols) {
    SurvivalDataset out;
    out.durations = data.durations;
    out.events = data.events;
    out.features.resize(data.features.rows(), static_cast<Eigen::Index>(cols.size()));
    out.feature_names.reserve(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.features.col(static_cast<Eigen::Index>(j)) = data.features.col(cols[j]);
        out.feature_names.push_back(data.feature_names[cols[j]]);
    }
    return out;
}

/** One distinct event time with its tied events and full risk set. */
struct RiskSetEntry {
    double time = 0.0;
    std::vector<int> event_indices;    // samples with an event exactly at `time`
    std::vector<int> at_risk_indices;  // samples with duration >= `time`
};

/** Breslow cumulative baseline hazard, one value per distinct event time. */
struct BaselineHazard {
    std::vector<double> event_times;        // strictly increasing
    std::vector<double> cumulative_hazard;  // non-decreasing
};

namespace detail {

/**
 * Score-independent ordering of a survival sample: samples sorted by
 * duration, distinct event times with tie counts (Breslow grouping), and for
 * each sample the index of the last event time it is still at risk for.
 */
struct SurvivalOrder {
    std::vector<int> by_duration;       // sample indices, duration asc, index asc
    std::vector<double> event_times;    // distinct times with >= 1 event, asc
    std::vector<int> event_counts;      // d_t per distinct event time
    std::vector<int> last_event_index;  // per sample: last event-time index with t <= duration, or -1
    int n_events = 0;
};

inline SurvivalOrder make_order(const Vector& durations, const IntVector& events) {
    const Eigen::Index n = durations.size();
    SurvivalOrder ord;
    ord.by_duration.resize(static_cast<std::size_t>(n));
    std::iota(ord.by_duration.begin(), ord.by_duration.end(), 0);
    std::sort(ord.by_duration.begin(), ord.by_duration.end(), [&](int a, int b) {
        if (durations[a] != durations[b]) return durations[a] < durations[b];
        return a < b;
    });
    for (int idx : ord.by_duration) {
        if (!events[idx]) continue;
        ++ord.n_events;
        if (ord.event_times.empty() || ord.event_times.back() != durations[idx]) {
            ord.event_times.push_back(durations[idx]);
            ord.event_counts.push_back(1);
        } else {
            ++ord.event_counts.back();
        }
    }
    ord.last_event_index.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto it = std::upper_bound(ord.event_times.begin(), ord.event_times.end(), durations[i]);
        ord.last_event_index[static_cast<std::size_t>(i)] =
            static_cast<int>(it - ord.event_times.begin()) - 1;
    }
    return ord;
}

/**
 * Per distinct event time t: log sum_{j in R(t)} exp(h_j), computed by a
 * streaming log-sum-exp over samples in descending duration order. Stable for
 * |h| up to ~700. Also accumulates sum of event scores per time.
 */
struct LikelihoodTerms {
    std::vector<double> log_denominators;  // aligned with order.event_times
    std::vector<double> event_score_sums;  // sum of h_i over events tied at each time
};

inline LikelihoodTerms accumulate_terms(const SurvivalOrder& ord, const Vector& durations,
                                        const IntVector& events, const RiskScores& scores) {
    const std::size_t n_times = ord.event_times.size();
    LikelihoodTerms terms;
    terms.log_denominators.assign(n_times, 0.0);
    terms.event_score_sums.assign(n_times, 0.0);

    double running_max = -std::numeric_limits<double>::infinity();
    double running_sum = 0.0;  // sum of exp(h - running_max) over samples added so far
    auto add_score = [&](double h) {
        if (h <= running_max) {
            running_sum += std::exp(h - running_max);
        } else {
            running_sum = running_sum * std::exp(running_max - h) + 1.0;
            running_max = h;
        }
    };

    // Walk samples from longest duration down; before leaving each distinct
    // event time, everyone with duration >= t has been added.
    std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(ord.by_duration.size()) - 1;
    for (std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(n_times) - 1; ti >= 0; --ti) {
        const double t = ord.event_times[static_cast<std::size_t>(ti)];
        while (pos >= 0 && durations[ord.by_duration[static_cast<std::size_t>(pos)]] >= t) {
            const int idx = ord.by_duration[static_cast<std::size_t>(pos)];
            add_score(scores[idx]);
            if (events[idx] && durations[idx] == t)
                terms.event_score_sums[static_cast<std::size_t>(ti)] += scores[idx];
            --pos;
        }
        terms.log_denominators[static_cast<std::size_t>(ti)] = running_max + std::log(running_sum);
    }
    return terms;
}

inline void check_likelihood_inputs(const SurvivalDataset& data, const RiskScores& scores) {
    data.validate();
    if (scores.size() != data.n_samples())
        throw ValidationError("risk scores length does not match dataset sample count");
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (!std::isfinite(scores[i]))
            throw ValidationError("non-finite risk score at row " + std::to_string(i));
    if (data.n_events() == 0)
        throw ValidationError("no observable events");
}

inline double nll_from_terms(const SurvivalOrder& ord, const LikelihoodTerms& terms) {
    double nll = 0.0;
    for (std::size_t ti = 0; ti < ord.event_times.size(); ++ti)
        nll += ord.event_counts[ti] * terms.log_denominators[ti] - terms.event_score_sums[ti];
    return nll;
}

inline Vector gradient_from_terms(const SurvivalOrder& ord, const LikelihoodTerms& terms,
                                  const IntVector& events, const RiskScores& scores) {
    const std::size_t n_times = ord.event_times.size();
    // Prefix log-sum-exp of log(d_t) - log_denominator_t over event times.
    // exp(h_k + prefix) <= total event count, so the final exp cannot overflow.
    std::vector<double> prefix(n_times);
    double run = -std::numeric_limits<double>::infinity();
    for (std::size_t ti = 0; ti < n_times; ++ti) {
        const double term = std::log(static_cast<double>(ord.event_counts[ti])) -
                            terms.log_denominators[ti];
        const double hi = std::max(run, term);
        run = hi + std::log(std::exp(run - hi) + std::exp(term - hi));
        prefix[ti] = run;
    }
    Vector grad(scores.size());
    for (Eigen::Index k = 0; k < scores.size(); ++k) {
        const int li = ord.last_event_index[static_cast<std::size_t>(k)];
        const double risk_mass =
            li < 0 ? 0.0 : std::exp(scores[k] + prefix[static_cast<std::size_t>(li)]);
        grad[k] = -(events[k] != 0 ? 1.0 : 0.0) + risk_mass;
    }
    return grad;
}

}  // namespace detail

/**
 * Distinct event times with their tied events and risk sets, ascending in
 * time. Every event appears exactly once as an event index; risk sets are
 * nested (later time => subset).
 */
inline std::vector<RiskSetEntry> risk_sets(const SurvivalDataset& data) {
    data.validate();
    if (data.n_events() == 0)
        throw ValidationError("no observable events");
    auto ord = detail::make_order(data.durations, data.events);
    std::vector<RiskSetEntry> sets(ord.event_times.size());
    for (std::size_t ti = 0; ti < ord.event_times.size(); ++ti)
        sets[ti].time = ord.event_times[ti];
    for (Eigen::Index i = 0; i < data.n_samples(); ++i) {
        auto lo = std::lower_bound(ord.event_times.begin(), ord.event_times.end(),
                                   data.durations[i]);
        if (data.events[i] && lo != ord.event_times.end() && *lo == data.durations[i])
            sets[static_cast<std::size_t>(lo - ord.event_times.begin())]
                .event_indices.push_back(static_cast<int>(i));
        // at risk for every event time <= duration
        for (std::size_t ti = 0; ti < ord.event_times.size() && ord.event_times[ti] <= data.durations[i]; ++ti)
            sets[ti].at_risk_indices.push_back(static_cast<int>(i));
    }
    return sets;
}

/**
 * Negative log partial likelihood with Breslow handling of tied event times:
 *
 *     -sum_{t: event time} [ sum_{i: event at t} h_i - d_t * log sum_{j in R(t)} exp(h_j) ]
 *
 * Always >= 0; each term is -log of a probability.
 */
inline double neg_log_partial_likelihood(const SurvivalDataset& data, const RiskScores& scores) {
    detail::check_likelihood_inputs(data, scores);
    auto ord = detail::make_order(data.durations, data.events);
    auto terms = detail::accumulate_terms(ord, data.durations, data.events, scores);
    return detail::nll_from_terms(ord, terms);
}

/**
 * Analytic gradient of the negative log partial likelihood with respect to
 * each per-sample log-risk score:
 *
 *     d/dh_k = -[event_k] + sum_{t <= T_k, event time} d_t * exp(h_k) / denom_t
 *
 * Entries sum to zero over all samples.
 */
inline Vector nll_gradient(const SurvivalDataset& data, const RiskScores& scores) {
    detail::check_likelihood_inputs(data, scores);
    auto ord = detail::make_order(data.durations, data.events);
    auto terms = detail::accumulate_terms(ord, data.durations, data.events, scores);
    return detail::gradient_from_terms(ord, terms, data.events, scores);
}

/**
 * Breslow estimator of the cumulative baseline hazard:
 * H0(t) = sum_{t_i <= t} d_i / sum_{j in R(t_i)} exp(h_j).
 */
inline BaselineHazard breslow_baseline(const SurvivalDataset& data, const RiskScores& scores) {
    detail::check_likelihood_inputs(data, scores);
    auto ord = detail::make_order(data.durations, data.events);
    auto terms = detail::accumulate_terms(ord, data.durations, data.events, scores);
    BaselineHazard out;
    out.event_times = ord.event_times;
    out.cumulative_hazard.resize(ord.event_times.size());
    double acc = 0.0;
    for (std::size_t ti = 0; ti < ord.event_times.size(); ++ti) {
        acc += std::exp(std::log(static_cast<double>(ord.event_counts[ti])) -
                        terms.log_denominators[ti]);
        out.cumulative_hazard[ti] = acc;
    }
    return out;
}

}  // namespace deepwait
