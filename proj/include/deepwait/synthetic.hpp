#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/rng.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

enum class BaselineKind { exponential, weibull };
enum class RiskKind { linear, product, custom };

/**
 * Synthetic survival data with a known proportional-hazards ground truth.
 * Features are i.i.d. standard normal; the event time comes from the chosen
 * baseline with hazard scaled by exp(true log-risk). Serves as the
 * verification oracle in place of the private VR dataset.
 */
struct SyntheticSpec {
    int n_samples = 1000;
    int n_features = 1;

    RiskKind risk = RiskKind::linear;
    Vector coefficients;  // linear: padded with zeros up to n_features
    int product_a = 0, product_b = 1;
    double product_scale = 1.0;
    std::function<double(const Eigen::RowVectorXd&)> custom_risk;  // in-process only

    BaselineKind baseline = BaselineKind::exponential;
    double rate = 1.0;   // exponential rate
    double shape = 1.0;  // weibull shape
    double scale = 1.0;  // weibull scale

    double censoring_rate = 0.0;  // target fraction in [0, 1)
    std::uint64_t seed = 0;

    void validate() const {
        if (n_samples < 2) throw ValidationError("synthetic: n_samples must be >= 2");
        if (n_features < 1) throw ValidationError("synthetic: n_features must be >= 1");
        if (censoring_rate < 0.0 || censoring_rate >= 1.0)
            throw ValidationError("synthetic: censoring rate must lie in [0, 1)");
        if (risk == RiskKind::linear && coefficients.size() > n_features)
            throw ValidationError("synthetic: more coefficients than features");
        if (risk == RiskKind::product &&
            (product_a >= n_features || product_b >= n_features || product_a < 0 || product_b < 0))
            throw ValidationError("synthetic: product feature index out of range");
        if (risk == RiskKind::custom && !custom_risk)
            throw ValidationError("synthetic: custom risk function not set");
        if (baseline == BaselineKind::exponential && !(rate > 0.0))
            throw ValidationError("synthetic: exponential rate must be positive");
        if (baseline == BaselineKind::weibull && (!(shape > 0.0) || !(scale > 0.0)))
            throw ValidationError("synthetic: weibull shape/scale must be positive");
    }

    static SyntheticSpec load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open synthetic spec '" + path.string() + "'");
        return parse(in);
    }

    static SyntheticSpec parse(std::istream& in) {
        SyntheticSpec spec;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = trim(line);
            if (line.empty() || line[0] == '#') continue;
            const auto colon = line.find(':');
            if (colon == std::string::npos)
                throw IoError("synthetic spec line " + std::to_string(line_no) +
                              ": expected 'key: value'");
            const std::string key = trim(line.substr(0, colon));
            const std::string value = trim(line.substr(colon + 1));
            auto ctx = "synthetic spec '" + key + "'";
            if (key == "n_samples") spec.n_samples = static_cast<int>(parse_double(value, ctx));
            else if (key == "n_features") spec.n_features = static_cast<int>(parse_double(value, ctx));
            else if (key == "risk") {
                if (value == "linear") spec.risk = RiskKind::linear;
                else if (value == "product") spec.risk = RiskKind::product;
                else throw IoError(ctx + ": unknown risk kind '" + value + "'");
            } else if (key == "coefficients") {
                std::vector<double> coefs;
                std::stringstream ss(value);
                std::string tok;
                while (std::getline(ss, tok, ','))
                    coefs.push_back(parse_double(trim(tok), ctx));
                spec.coefficients = Eigen::Map<Vector>(coefs.data(),
                                                       static_cast<Eigen::Index>(coefs.size()));
            } else if (key == "product_features") {
                std::stringstream ss(value);
                if (!(ss >> spec.product_a >> spec.product_b))
                    throw IoError(ctx + ": expected two feature indices");
            } else if (key == "product_scale") spec.product_scale = parse_double(value, ctx);
            else if (key == "baseline") {
                if (value == "exponential") spec.baseline = BaselineKind::exponential;
                else if (value == "weibull") spec.baseline = BaselineKind::weibull;
                else throw IoError(ctx + ": unknown baseline '" + value + "'");
            } else if (key == "rate") spec.rate = parse_double(value, ctx);
            else if (key == "shape") spec.shape = parse_double(value, ctx);
            else if (key == "scale") spec.scale = parse_double(value, ctx);
            else if (key == "censoring") spec.censoring_rate = parse_double(value, ctx);
            else if (key == "seed") spec.seed = static_cast<std::uint64_t>(parse_double(value, ctx));
            else throw IoError("synthetic spec line " + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
        }
        spec.validate();
        return spec;
    }
};

struct SyntheticTruth {
    Vector log_risk;          // true per-sample log-risk
    Vector coefficients;      // linear case, padded to n_features
    Vector event_times;       // uncensored event times
    double censoring_target = 0.0;
    double censoring_realized = 0.0;
};

inline std::pair<SurvivalDataset, SyntheticTruth> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int n = spec.n_samples;
    const int p = spec.n_features;
    Rng rng(derive_seed(spec.seed, 0x5e1f));

    SurvivalDataset data;
    data.features.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) data.features(i, j) = rng.normal();
    for (int j = 0; j < p; ++j) data.feature_names.push_back("x" + std::to_string(j));

    SyntheticTruth truth;
    truth.coefficients = Vector::Zero(p);
    if (spec.risk == RiskKind::linear)
        truth.coefficients.head(spec.coefficients.size()) = spec.coefficients;
    truth.log_risk.resize(n);
    for (int i = 0; i < n; ++i) {
        switch (spec.risk) {
            case RiskKind::linear:
                truth.log_risk[i] = data.features.row(i) * truth.coefficients;
                break;
            case RiskKind::product:
                truth.log_risk[i] = spec.product_scale * data.features(i, spec.product_a) *
                                    data.features(i, spec.product_b);
                break;
            case RiskKind::custom:
                truth.log_risk[i] = spec.custom_risk(data.features.row(i));
                break;
        }
    }

    // Inverse-CDF sampling from the baseline scaled by exp(log-risk):
    // exponential: T = -ln(U) / (rate * exp(h))
    // weibull:     T = scale * (-ln(U) * exp(-h))^(1/shape)
    truth.event_times.resize(n);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        if (spec.baseline == BaselineKind::exponential)
            truth.event_times[i] = -std::log(u) / (spec.rate * std::exp(truth.log_risk[i]));
        else
            truth.event_times[i] =
                spec.scale * std::pow(-std::log(u) * std::exp(-truth.log_risk[i]), 1.0 / spec.shape);
    }

    truth.censoring_target = spec.censoring_rate;
    data.durations = truth.event_times;
    data.events = IntVector::Ones(n);

    const long m = std::lround(spec.censoring_rate * n);
    if (m >= n)
        throw ValidationError("synthetic: censoring target leaves no events");
    if (m > 0) {
        // Exponential censoring C_i = -ln(V_i)/theta. Sample i ends censored
        // iff theta > q_i = -ln(V_i)/T_i, so a theta between the m-th and
        // (m+1)-th order statistic of q censors exactly m samples.
        std::vector<double> v(n), q(n);
        for (int i = 0; i < n; ++i) {
            v[i] = rng.uniform();
            q[i] = -std::log(v[i]) / truth.event_times[i];
        }
        std::vector<double> sorted_q = q;
        std::sort(sorted_q.begin(), sorted_q.end());
        const double theta = 0.5 * (sorted_q[m - 1] + sorted_q[m]);
        int censored = 0;
        for (int i = 0; i < n; ++i) {
            const double c = -std::log(v[i]) / theta;
            if (c < truth.event_times[i]) {
                data.durations[i] = c;
                data.events[i] = 0;
                ++censored;
            }
        }
        truth.censoring_realized = static_cast<double>(censored) / n;
    }

    data.validate();
    return {data, truth};
}

}  // namespace deepwait
