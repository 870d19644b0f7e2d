#pragma once

#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/rng.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

/**
 * Harrell's concordance index. Comparable pairs are (i, j) with t_i < t_j
 * and event_i = 1; a pair is concordant when the earlier event carries the
 * higher risk score, tied scores count 1/2.
 */
inline double c_index(const Vector& durations, const IntVector& events, const RiskScores& scores) {
    const Eigen::Index n = durations.size();
    if (events.size() != n || scores.size() != n)
        throw ValidationError("c_index: input lengths disagree");
    double comparable = 0.0;
    double concordant = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (durations[i] >= durations[j]) continue;
            comparable += 1.0;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) concordant += 0.5;
        }
    }
    if (comparable == 0.0)
        throw ValidationError("c_index: no comparable pairs");
    return concordant / comparable;
}

inline double c_index(const RiskScores& scores, const SurvivalDataset& data) {
    return c_index(data.durations, data.events, scores);
}

/**
 * Deterministic k-fold partition: indices shuffled by seed and dealt into
 * folds whose sizes differ by at most one. When `events` is given, reshuffles
 * (bounded retries) until every fold's training complement has at least one
 * event.
 */
inline std::vector<std::vector<int>> kfold_split(int n_samples, int k, std::uint64_t seed,
                                                 const IntVector* events = nullptr) {
    if (k < 2) throw ValidationError("kfold_split: k must be >= 2");
    if (n_samples < k) throw ValidationError("kfold_split: need at least k samples");

    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<int> order(static_cast<std::size_t>(n_samples));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, 0xf01d + static_cast<std::uint64_t>(attempt)));
        rng.shuffle(order);

        std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
        for (int i = 0; i < n_samples; ++i)
            folds[static_cast<std::size_t>(i % k)].push_back(order[static_cast<std::size_t>(i)]);

        if (!events) return folds;
        const int total_events = [&] {
            int c = 0;
            for (Eigen::Index i = 0; i < events->size(); ++i) c += (*events)[i] != 0;
            return c;
        }();
        bool ok = total_events > 0;
        for (const auto& fold : folds) {
            int fold_events = 0;
            for (int idx : fold) fold_events += (*events)[idx] != 0;
            if (total_events - fold_events < 1) ok = false;
        }
        if (ok) return folds;
    }
    throw ValidationError("kfold_split: cannot place at least one event in every training split");
}

/** Per-sample log-risk scorer produced by a fitted pipeline. */
using Scorer = std::function<RiskScores(const Matrix& features)>;

/**
 * Fits a pipeline on a training split and returns a scorer for new feature
 * rows. All data-derived preprocessing (ranking, selection, standardization)
 * must happen inside, on the training split it receives.
 */
using ScorerFactory = std::function<Scorer(const SurvivalDataset& train)>;

struct CrossValidationResult {
    std::vector<double> fold_c_indices;
    double mean_c_index = 0.0;
};

/**
 * k-fold cross-validation. For each fold the pipeline is fitted on the
 * complement and scored on the held-out rows; held-out durations/events are
 * used only for the fold's C-index.
 */
inline CrossValidationResult cross_validate(const SurvivalDataset& data, int k,
                                            std::uint64_t seed, const ScorerFactory& factory) {
    data.validate();
    const auto folds = kfold_split(static_cast<int>(data.n_samples()), k, seed, &data.events);

    CrossValidationResult result;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<int> train_idx;
        for (std::size_t g = 0; g < folds.size(); ++g)
            if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
        std::sort(train_idx.begin(), train_idx.end());

        try {
            const SurvivalDataset train = subset_rows(data, train_idx);
            const SurvivalDataset test = subset_rows(data, folds[f]);
            const Scorer scorer = factory(train);
            const RiskScores scores = scorer(test.features);
            result.fold_c_indices.push_back(c_index(test.durations, test.events, scores));
        } catch (const ValidationError& e) {
            throw ValidationError("fold " + std::to_string(f) + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("fold " + std::to_string(f) + ": " + e.what());
        } catch (const IoError& e) {
            throw IoError("fold " + std::to_string(f) + ": " + e.what());
        }
    }
    result.mean_c_index =
        std::accumulate(result.fold_c_indices.begin(), result.fold_c_indices.end(), 0.0) /
        static_cast<double>(result.fold_c_indices.size());
    return result;
}

}  // namespace deepwait
