#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

/**
 * Variance inflation factors: VIF_j = 1 / (1 - R_j^2) where R_j^2 comes from
 * regressing column j on all other columns plus an intercept. Exactly
 * collinear columns report +infinity instead of failing.
 */
inline Vector vif(const Matrix& features) {
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (n <= p)
        throw ValidationError("vif: need more samples than features (n=" + std::to_string(n) +
                              ", p=" + std::to_string(p) + ")");
    Vector out(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Vector target = features.col(j);
        const double mean = target.mean();
        const double ss_tot = (target.array() - mean).square().sum();
        if (!(ss_tot > 0.0))
            throw ValidationError("vif: feature column " + std::to_string(j) + " is constant");
        if (p == 1) {
            out[j] = 1.0;
            continue;
        }
        Matrix design(n, p);  // intercept + all other columns
        design.col(0).setOnes();
        Eigen::Index c = 1;
        for (Eigen::Index k = 0; k < p; ++k)
            if (k != j) design.col(c++) = features.col(k);
        const Vector coef = design.colPivHouseholderQr().solve(target);
        const double ss_res = (target - design * coef).squaredNorm();
        // VIF = ss_tot / ss_res; treat a vanishing residual as exact collinearity.
        out[j] = ss_res <= 1e-12 * ss_tot ? std::numeric_limits<double>::infinity()
                                          : ss_tot / ss_res;
    }
    return out;
}

struct VifRemoval {
    std::string feature;
    double vif = 0.0;
};

struct VifScreenResult {
    std::vector<int> kept;  // indices into the original feature set, original order
    std::vector<VifRemoval> removed;
};

/**
 * Iteratively removes the feature with the largest VIF above `threshold`,
 * recomputing after each removal. Ties break toward the lowest column index.
 */
inline VifScreenResult vif_screen(const SurvivalDataset& data, double threshold = 5.0) {
    data.validate();
    VifScreenResult result;
    for (int j = 0; j < data.n_features(); ++j) result.kept.push_back(j);

    while (result.kept.size() > 1) {
        const auto current = subset_features(data, result.kept);
        const Vector v = vif(current.features);
        int worst = -1;
        for (Eigen::Index j = 0; j < v.size(); ++j)
            if (v[j] > threshold && (worst < 0 || v[j] > v[worst])) worst = static_cast<int>(j);
        if (worst < 0) break;
        result.removed.push_back({current.feature_names[worst], v[worst]});
        result.kept.erase(result.kept.begin() + worst);
    }
    return result;
}

}  // namespace deepwait
