#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "deepwait/csv.hpp"
#include "deepwait/error.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/rng.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

struct ReliefConfig {
    int k_neighbors = 10;
    int m_samples = 0;   // 0 = every instance (deterministic exhaustive pass)
    double sigma = 20.0;  // rank-based neighbor influence decay
    std::uint64_t seed = 0;

    void validate() const {
        if (k_neighbors < 1) throw ValidationError("relieff: k_neighbors must be >= 1");
        if (m_samples < 0) throw ValidationError("relieff: m_samples must be >= 1 (0 = all)");
        if (!(sigma > 0.0)) throw ValidationError("relieff: sigma must be positive");
    }
};

struct RankedFeature {
    std::string name;
    double weight = 0.0;
};

/** Features ordered by descending weight, ties by ascending name. */
struct FeatureRanking {
    std::vector<RankedFeature> order;
    std::vector<std::string> warnings;  // e.g. zero-range features

    const RankedFeature* find(const std::string& name) const {
        for (const auto& f : order)
            if (f.name == name) return &f;
        return nullptr;
    }
};

/**
 * RReliefF importance weights for a numeric target. For each of m sampled
 * instances, the k nearest neighbors (Manhattan distance over range-normalized
 * differences, the same diff used in the accumulators, so any positive affine
 * rescaling of a feature leaves the result unchanged) contribute
 * rank-weighted diffs to
 *
 *   N_dC       += diff(target) * influence
 *   N_dA[a]    += diff(a) * influence
 *   N_dC&dA[a] += diff(target) * diff(a) * influence
 *
 * with influence exp(-(rank/sigma)^2) normalized to sum 1 per instance, and
 *
 *   W[a] = N_dC&dA[a]/N_dC - (N_dA[a] - N_dC&dA[a])/(m - N_dC).
 *
 * A constant target makes every weight 0; a zero-range feature has diff 0
 * everywhere, weight exactly 0, and a warning.
 */
inline FeatureRanking rrelieff(const Matrix& features, const std::vector<std::string>& names,
                               const Vector& target, const ReliefConfig& config = {}) {
    config.validate();
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (static_cast<Eigen::Index>(names.size()) != p)
        throw ValidationError("relieff: feature name count does not match columns");
    if (target.size() != n) throw ValidationError("relieff: target length does not match rows");
    if (!features.allFinite() || !target.allFinite())
        throw ValidationError("relieff: non-finite inputs");
    if (n < config.k_neighbors + 1)
        throw ValidationError("relieff: need at least k+1 instances, got " + std::to_string(n) +
                              " for k=" + std::to_string(config.k_neighbors));

    FeatureRanking result;

    Vector inv_range(p);
    for (Eigen::Index a = 0; a < p; ++a) {
        const double range = features.col(a).maxCoeff() - features.col(a).minCoeff();
        inv_range[a] = range > 0.0 ? 1.0 / range : 0.0;
        if (!(range > 0.0))
            result.warnings.push_back("feature '" + names[static_cast<std::size_t>(a)] +
                                      "' has zero range; its weight is 0");
    }
    const double target_range = target.maxCoeff() - target.minCoeff();
    const double inv_target_range = target_range > 0.0 ? 1.0 / target_range : 0.0;

    // influence of the r-th nearest neighbor, r = 1..k, normalized per instance
    const int k = config.k_neighbors;
    std::vector<double> influence(static_cast<std::size_t>(k));
    double influence_sum = 0.0;
    for (int r = 1; r <= k; ++r) {
        const double w = std::exp(-std::pow(r / config.sigma, 2.0));
        influence[static_cast<std::size_t>(r - 1)] = w;
        influence_sum += w;
    }
    for (double& w : influence) w /= influence_sum;

    // sampled instances, ascending index for a fixed accumulation order
    std::vector<int> sampled(static_cast<std::size_t>(n));
    std::iota(sampled.begin(), sampled.end(), 0);
    if (config.m_samples > 0 && config.m_samples < n) {
        Rng rng(derive_seed(config.seed, 0x3e1f));
        rng.shuffle(sampled);
        sampled.resize(static_cast<std::size_t>(config.m_samples));
        std::sort(sampled.begin(), sampled.end());
    }
    const double m = static_cast<double>(sampled.size());

    double ndc = 0.0;
    Vector nda = Vector::Zero(p);
    Vector ndcda = Vector::Zero(p);
    std::vector<int> neighbor_order;
    neighbor_order.reserve(static_cast<std::size_t>(n));

    for (const int i : sampled) {
        const Vector dist =
            (features.rowwise() - features.row(i)).cwiseAbs() * inv_range;
        neighbor_order.clear();
        for (int j = 0; j < n; ++j)
            if (j != i) neighbor_order.push_back(j);
        std::partial_sort(neighbor_order.begin(), neighbor_order.begin() + k,
                          neighbor_order.end(), [&dist](int a, int b) {
                              if (dist[a] != dist[b]) return dist[a] < dist[b];
                              return a < b;
                          });
        for (int r = 0; r < k; ++r) {
            const int j = neighbor_order[static_cast<std::size_t>(r)];
            const double infl = influence[static_cast<std::size_t>(r)];
            const double dtau = std::abs(target[i] - target[j]) * inv_target_range;
            const Vector diff =
                ((features.row(i) - features.row(j)).cwiseAbs().transpose().array() *
                 inv_range.array())
                    .matrix();
            ndc += dtau * infl;
            nda += infl * diff;
            ndcda += (dtau * infl) * diff;
        }
    }

    Vector weights = Vector::Zero(p);
    if (ndc > 0.0) {
        for (Eigen::Index a = 0; a < p; ++a)
            weights[a] = ndcda[a] / ndc - (nda[a] - ndcda[a]) / (m - ndc);
    }

    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (weights[a] != weights[b]) return weights[a] > weights[b];
        return names[static_cast<std::size_t>(a)] < names[static_cast<std::size_t>(b)];
    });
    for (const int a : order)
        result.order.push_back({names[static_cast<std::size_t>(a)], weights[a]});
    return result;
}

/** Ranking against the observed waiting time (censored rows keep their observed time). */
inline FeatureRanking rank_features(const SurvivalDataset& data, const ReliefConfig& config = {}) {
    data.validate();
    return rrelieff(data.features, data.feature_names, data.durations, config);
}

/** First n features of the ranking, best first. */
inline std::vector<std::string> select_top_n(const FeatureRanking& ranking, int n) {
    if (n < 1 || n > static_cast<int>(ranking.order.size()))
        throw ValidationError("select_top_n: n must lie in [1, " +
                              std::to_string(ranking.order.size()) + "], got " +
                              std::to_string(n));
    std::vector<std::string> names;
    for (int r = 0; r < n; ++r) names.push_back(ranking.order[static_cast<std::size_t>(r)].name);
    return names;
}

/** CSV with columns rank,feature,weight (rank is 1-based). */
inline void save_ranking(const FeatureRanking& ranking, const std::filesystem::path& path) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < ranking.order.size(); ++r)
        rows.push_back({std::to_string(r + 1), ranking.order[r].name,
                        format_double(ranking.order[r].weight)});
    write_csv(path, {"rank", "feature", "weight"}, rows);
}

inline FeatureRanking load_ranking(const std::filesystem::path& path) {
    const CsvTable csv = read_csv(path);
    if (csv.header != std::vector<std::string>{"rank", "feature", "weight"})
        throw IoError("'" + path.string() + "': expected header rank,feature,weight");
    FeatureRanking ranking;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        if (csv.rows[r][0] != std::to_string(r + 1))
            throw IoError("'" + path.string() + "': rank column must count 1..n");
        ranking.order.push_back(
            {csv.rows[r][1], parse_double(csv.rows[r][2], "ranking weight")});
    }
    return ranking;
}

}  // namespace deepwait
