#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "deepwait/error.hpp"
#include "deepwait/preprocess.hpp"
#include "deepwait/survival.hpp"

namespace deepwait {

struct LinearCphOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;       // convergence on max |delta beta|
    double gradient_tolerance = 1e-8;
    double ridge = 0.0;            // optional stabilizer for near-singular Hessians
};

struct LinearCphFit {
    std::vector<std::string> feature_names;
    Vector coefficients;
    Vector standard_errors;
    Vector hazard_ratios;  // exp(coefficients), same floating operation
    Vector p_values;       // two-sided Wald
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    bool ridge_applied = false;
};

namespace detail {

struct CphDerivatives {
    double nll = 0.0;
    Vector gradient;
    Matrix hessian;
};

/**
 * Value, gradient and Hessian of the negative log partial likelihood at
 * beta, Breslow ties. One descending sweep maintains the risk-set
 * accumulators S0 = sum exp(h), S1 = sum exp(h) x, S2 = sum exp(h) x x^T
 * (all scaled by exp(-max h) for stability); at each distinct event time
 *
 *   grad += d_t * S1/S0 - sum_{events at t} x_i
 *   hess += d_t * (S2/S0 - (S1/S0)(S1/S0)^T)
 */
inline CphDerivatives cph_derivatives(const SurvivalOrder& ord, const Matrix& X,
                                      const Vector& durations, const IntVector& events,
                                      const Vector& beta) {
    const Eigen::Index p = X.cols();
    const Vector h = X * beta;
    const double hmax = h.maxCoeff();

    CphDerivatives d;
    d.gradient = Vector::Zero(p);
    d.hessian = Matrix::Zero(p, p);

    double s0 = 0.0;
    Vector s1 = Vector::Zero(p);
    Matrix s2 = Matrix::Zero(p, p);

    std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(ord.by_duration.size()) - 1;
    for (std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(ord.event_times.size()) - 1; ti >= 0;
         --ti) {
        const double t = ord.event_times[static_cast<std::size_t>(ti)];
        while (pos >= 0 && durations[ord.by_duration[static_cast<std::size_t>(pos)]] >= t) {
            const int i = ord.by_duration[static_cast<std::size_t>(pos)];
            const double w = std::exp(h[i] - hmax);
            s0 += w;
            s1 += w * X.row(i).transpose();
            s2.noalias() += w * (X.row(i).transpose() * X.row(i));
            if (events[i] && durations[i] == t) {
                d.gradient -= X.row(i).transpose();
                d.nll -= h[i];
            }
            --pos;
        }
        const double dt = static_cast<double>(ord.event_counts[static_cast<std::size_t>(ti)]);
        const Vector mean = s1 / s0;
        d.nll += dt * (std::log(s0) + hmax);
        d.gradient += dt * mean;
        d.hessian += dt * (s2 / s0 - mean * mean.transpose());
    }
    return d;
}

inline double wald_p_value(double coefficient, double standard_error) {
    const double z = std::abs(coefficient / standard_error);
    return std::erfc(z / std::sqrt(2.0));  // 2 * (1 - Phi(z))
}

}  // namespace detail

/**
 * Newton-Raphson fit of the linear Cox proportional hazards model with
 * step-halving. Standard errors come from the inverse Hessian diagonal,
 * p-values from two-sided Wald tests. A singular Hessian raises
 * NumericalError unless `ridge` is set.
 */
inline LinearCphFit fit_linear_cph(const SurvivalDataset& data,
                                   const LinearCphOptions& options = {}) {
    data.validate();
    if (data.n_events() == 0) throw ValidationError("no observable events");
    if (data.n_features() == 0) throw ValidationError("fit: dataset has no features");

    const auto ord = detail::make_order(data.durations, data.events);
    const Eigen::Index p = data.n_features();

    LinearCphFit fit;
    fit.feature_names = data.feature_names;
    fit.coefficients = Vector::Zero(p);

    Vector beta = Vector::Zero(p);
    auto derivs = detail::cph_derivatives(ord, data.features, data.durations, data.events, beta);

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        if (derivs.gradient.norm() < options.gradient_tolerance) {
            fit.converged = true;
            break;
        }
        Matrix hessian = derivs.hessian;
        Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian);
        const double max_eig = eig.eigenvalues().maxCoeff();
        const double min_eig = eig.eigenvalues().minCoeff();
        if (min_eig <= 1e-12 * std::max(max_eig, 1.0)) {
            if (options.ridge > 0.0) {
                hessian.diagonal().array() += options.ridge;
                fit.ridge_applied = true;
            } else {
                throw NumericalError(
                    "singular Hessian: features look collinear; screen them with VIF "
                    "or set a ridge penalty");
            }
        }
        Vector step = hessian.ldlt().solve(-derivs.gradient);

        // Step-halving: the partial likelihood is concave, so a damped Newton
        // step must eventually decrease the NLL. Near the optimum the true
        // decrease sinks below the roundoff of the NLL sum itself; acceptance
        // tolerates that noise floor so a good step is not halved into a
        // stall, leaving convergence to the gradient check above.
        const double noise_floor = 1e-12 * (std::abs(derivs.nll) + 1.0);
        double scale = 1.0;
        detail::CphDerivatives next;
        for (int halving = 0; halving < 60; ++halving) {
            next = detail::cph_derivatives(ord, data.features, data.durations, data.events,
                                           beta + scale * step);
            if (next.nll <= derivs.nll + noise_floor) break;
            scale *= 0.5;
        }
        const Vector delta = scale * step;
        beta += delta;
        derivs = next;
        fit.iterations = iter + 1;
        if (delta.cwiseAbs().maxCoeff() < options.tolerance) {
            fit.converged = true;
            break;
        }
    }
    if (derivs.gradient.norm() < options.gradient_tolerance) fit.converged = true;

    fit.coefficients = beta;
    fit.log_likelihood = -derivs.nll;
    // scalar std::exp so reported ratios match exp(coefficient) bit for bit
    fit.hazard_ratios.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) fit.hazard_ratios[j] = std::exp(beta[j]);

    Matrix hessian = derivs.hessian;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian);
    if (eig.eigenvalues().minCoeff() <=
        1e-12 * std::max(eig.eigenvalues().maxCoeff(), 1.0)) {
        if (options.ridge > 0.0) {
            hessian.diagonal().array() += options.ridge;
            fit.ridge_applied = true;
            eig.compute(hessian);
        } else {
            throw NumericalError(
                "singular Hessian at optimum: features look collinear; screen them with "
                "VIF or set a ridge penalty");
        }
    }
    const Matrix covariance = eig.eigenvectors() *
                              eig.eigenvalues().cwiseInverse().asDiagonal() *
                              eig.eigenvectors().transpose();
    fit.standard_errors = covariance.diagonal().cwiseSqrt();
    fit.p_values.resize(p);
    for (Eigen::Index j = 0; j < p; ++j)
        fit.p_values[j] = detail::wald_p_value(beta[j], fit.standard_errors[j]);
    return fit;
}

/** Log-risk scores: dot product with the fitted coefficients. */
inline RiskScores predict_risk(const LinearCphFit& fit, const Matrix& features) {
    if (features.cols() != fit.coefficients.size())
        throw ValidationError("predict_risk: expected " +
                              std::to_string(fit.coefficients.size()) + " features, got " +
                              std::to_string(features.cols()));
    return features * fit.coefficients;
}

struct EliminationStep {
    std::string feature;
    double p_value = 0.0;
};

struct BackwardEliminationResult {
    LinearCphFit fit;
    std::vector<int> kept;  // indices into the original feature set
    std::vector<EliminationStep> removed;
};

/**
 * Backward elimination: repeatedly refit, dropping the single feature with
 * the largest p-value above `alpha`, until every retained p-value is <= alpha.
 */
inline BackwardEliminationResult backward_eliminate(const SurvivalDataset& data,
                                                    double alpha = 0.05,
                                                    const LinearCphOptions& options = {}) {
    BackwardEliminationResult result;
    for (int j = 0; j < data.n_features(); ++j) result.kept.push_back(j);

    while (true) {
        const auto current = subset_features(data, result.kept);
        result.fit = fit_linear_cph(current, options);
        if (!result.fit.converged)
            throw NumericalError("backward elimination: fit did not converge with features " +
                                 std::to_string(result.kept.size()));
        int worst = -1;
        for (Eigen::Index j = 0; j < result.fit.p_values.size(); ++j)
            if (result.fit.p_values[j] > alpha &&
                (worst < 0 || result.fit.p_values[j] > result.fit.p_values[worst]))
                worst = static_cast<int>(j);
        if (worst < 0) break;
        if (result.kept.size() == 1)
            throw ValidationError("backward elimination reached the null model");
        result.removed.push_back({result.fit.feature_names[worst], result.fit.p_values[worst]});
        result.kept.erase(result.kept.begin() + worst);
    }
    return result;
}

/** Table-3-style report: feature, coefficient, hazard ratio, p-value. */
inline std::string format_fit_table(const LinearCphFit& fit) {
    std::size_t name_width = 8;
    for (const auto& name : fit.feature_names) name_width = std::max(name_width, name.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << "Variable"
        << std::right << std::setw(12) << "Coefficient" << std::setw(14) << "Hazard Ratio"
        << std::setw(10) << "p-value" << "\n";
    for (std::size_t j = 0; j < fit.feature_names.size(); ++j) {
        const double pv = fit.p_values[static_cast<Eigen::Index>(j)];
        std::ostringstream pstr;
        if (pv < 0.005) pstr << "<0.005";
        else pstr << std::fixed << std::setprecision(3) << pv;
        out << std::left << std::setw(static_cast<int>(name_width) + 2) << fit.feature_names[j]
            << std::right << std::fixed << std::setprecision(2) << std::setw(12)
            << fit.coefficients[static_cast<Eigen::Index>(j)] << std::setw(14)
            << fit.hazard_ratios[static_cast<Eigen::Index>(j)] << std::setw(10) << pstr.str()
            << "\n";
    }
    return out.str();
}

inline void save_fit(const LinearCphFit& fit, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write fit '" + path.string() + "'");
    out << "deepwait-linear-cph v1\n";
    out << "log_likelihood " << format_double(fit.log_likelihood) << "\n";
    out << "iterations " << fit.iterations << "\n";
    out << "converged " << (fit.converged ? 1 : 0) << "\n";
    out << "ridge_applied " << (fit.ridge_applied ? 1 : 0) << "\n";
    for (std::size_t j = 0; j < fit.feature_names.size(); ++j) {
        out << "feature " << fit.feature_names[j] << "\n";
        out << "coefficient " << format_double(fit.coefficients[static_cast<Eigen::Index>(j)])
            << "\n";
        out << "stderr " << format_double(fit.standard_errors[static_cast<Eigen::Index>(j)])
            << "\n";
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline LinearCphFit load_fit(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fit '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || trim(line) != "deepwait-linear-cph v1")
        throw IoError("'" + path.string() + "': not a deepwait-linear-cph v1 file");
    LinearCphFit fit;
    std::vector<double> coefs, errs;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto space = line.find(' ');
        const std::string key = line.substr(0, space);
        const std::string value = space == std::string::npos ? "" : trim(line.substr(space + 1));
        if (key == "log_likelihood") fit.log_likelihood = parse_double(value, key);
        else if (key == "iterations") fit.iterations = static_cast<int>(parse_double(value, key));
        else if (key == "converged") fit.converged = value == "1";
        else if (key == "ridge_applied") fit.ridge_applied = value == "1";
        else if (key == "feature") fit.feature_names.push_back(value);
        else if (key == "coefficient") coefs.push_back(parse_double(value, key));
        else if (key == "stderr") errs.push_back(parse_double(value, key));
        else throw IoError("'" + path.string() + "': unknown key '" + key + "'");
    }
    if (coefs.size() != fit.feature_names.size() || errs.size() != fit.feature_names.size())
        throw IoError("'" + path.string() + "': malformed fit file");
    fit.coefficients = Eigen::Map<Vector>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
    fit.standard_errors = Eigen::Map<Vector>(errs.data(), static_cast<Eigen::Index>(errs.size()));
    fit.hazard_ratios.resize(fit.coefficients.size());
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j)
        fit.hazard_ratios[j] = std::exp(fit.coefficients[j]);
    fit.p_values.resize(fit.coefficients.size());
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j)
        fit.p_values[j] = detail::wald_p_value(fit.coefficients[j], fit.standard_errors[j]);
    return fit;
}

}  // namespace deepwait
