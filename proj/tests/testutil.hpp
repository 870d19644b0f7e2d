#pragma once

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <system_error>
#include <vector>

#include "deepwait/survival.hpp"

namespace deepwait::testutil {

// RAII scratch directory under the system temp path.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        dir_ = std::filesystem::temp_directory_path() /
               ("deepwait-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        std::filesystem::create_directories(dir_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(dir_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path path(const std::string& name) const { return dir_ / name; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

// Random right-censored instance with continuous durations (ties unlikely).
inline SurvivalDataset random_dataset(int n, int p, double censor_frac, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    SurvivalDataset data;
    data.features.resize(n, p);
    data.durations.resize(n);
    data.events.resize(n);
    for (int j = 0; j < p; ++j)
        data.feature_names.push_back("x" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) data.features(i, j) = normal(rng);
        data.durations[i] = expo(rng) + 1e-3;
        data.events[i] = unif(rng) < censor_frac ? 0 : 1;
    }
    if (data.n_events() == 0) data.events[0] = 1;
    return data;
}

// Same but with integer-valued durations so tied event times occur.
inline SurvivalDataset random_tied_dataset(int n, int p, double censor_frac, std::uint64_t seed) {
    SurvivalDataset data = random_dataset(n, p, censor_frac, seed);
    for (int i = 0; i < n; ++i)
        data.durations[i] = std::ceil(data.durations[i] * 3.0);
    return data;
}

// Central finite differences of neg_log_partial_likelihood w.r.t. scores.
inline Vector fd_nll_gradient(const SurvivalDataset& data, const RiskScores& scores,
                              double step = 1e-5) {
    Vector grad(scores.size());
    for (Eigen::Index k = 0; k < scores.size(); ++k) {
        RiskScores hi = scores, lo = scores;
        hi[k] += step;
        lo[k] -= step;
        grad[k] = (neg_log_partial_likelihood(data, hi) - neg_log_partial_likelihood(data, lo)) /
                  (2.0 * step);
    }
    return grad;
}

inline double max_relative_error(const Vector& got, const Vector& want) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < got.size(); ++i) {
        const double scale = std::max({1e-8, std::abs(got[i]), std::abs(want[i])});
        worst = std::max(worst, std::abs(got[i] - want[i]) / scale);
    }
    return worst;
}

}  // namespace deepwait::testutil
