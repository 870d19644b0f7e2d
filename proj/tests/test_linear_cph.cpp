#include "deepwait/linear_cph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "deepwait/synthetic.hpp"
#include "testutil.hpp"

using namespace deepwait;

namespace {

// Three samples, all events, binary feature [0, 1, 0].  The score equation
// reduces to exp(2*beta) = 2, so the optimum is known in closed form:
//   beta* = ln(2)/2, hessian = 6*sqrt(2) - 8, se = 1/sqrt(hessian).
SurvivalDataset hand_dataset() {
    SurvivalDataset data;
    data.features = Matrix(3, 1);
    data.features << 0.0, 1.0, 0.0;
    data.feature_names = {"flag"};
    data.durations = Vector(3);
    data.durations << 1.0, 2.0, 3.0;
    data.events = IntVector::Ones(3);
    return data;
}

}  // namespace

TEST(LinearCph, HandSolvableScoreEquation) {
    const auto fit = fit_linear_cph(hand_dataset());
    const double beta = 0.5 * std::log(2.0);
    const double se = 1.0 / std::sqrt(6.0 * std::numbers::sqrt2 - 8.0);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.coefficients[0], beta, 1e-7);
    EXPECT_NEAR(fit.standard_errors[0], se, 1e-6);
    const double expected_nll = std::log(2.0 + std::numbers::sqrt2) - beta +
                                std::log(1.0 + std::numbers::sqrt2);
    EXPECT_NEAR(fit.log_likelihood, -expected_nll, 1e-9);
    EXPECT_NEAR(fit.p_values[0], std::erfc(beta / se / std::numbers::sqrt2), 1e-6);
}

TEST(LinearCph, ScoreVanishesAtOptimum) {
    // Independent oracle: the per-sample gradient routine uses a different
    // accumulation scheme, so X^T grad(X beta) ~ 0 is a real cross-check.
    const auto data = testutil::random_tied_dataset(150, 4, 0.25, 31);
    const auto fit = fit_linear_cph(data);
    ASSERT_TRUE(fit.converged);
    const Vector score = data.features.transpose() *
                         nll_gradient(data, data.features * fit.coefficients);
    EXPECT_LT(score.norm(), 1e-5);
    EXPECT_NEAR(fit.log_likelihood,
                -neg_log_partial_likelihood(data, data.features * fit.coefficients), 1e-9);
}

TEST(LinearCph, RecoversGeneratingCoefficients) {
    SyntheticSpec spec;
    spec.n_samples = 2000;
    spec.n_features = 3;
    spec.risk = RiskKind::linear;
    spec.coefficients = Vector(3);
    spec.coefficients << 1.0, -0.5, 0.0;
    spec.censoring_rate = 0.3;
    spec.seed = 20;
    const auto [data, truth] = generate_synthetic(spec);
    const auto fit = fit_linear_cph(data);
    ASSERT_TRUE(fit.converged);
    for (int j = 0; j < 3; ++j) {
        EXPECT_NEAR(fit.coefficients[j], truth.coefficients[j], 0.1);
    }
    // strong effects detected, null effect not
    EXPECT_LT(fit.p_values[0], 1e-6);
    EXPECT_LT(fit.p_values[1], 1e-6);
    EXPECT_GT(fit.p_values[2], 1e-3);
}

TEST(LinearCph, HazardRatioIsExactExpOfCoefficient) {
    const auto fit = fit_linear_cph(testutil::random_dataset(60, 2, 0.2, 12));
    for (int j = 0; j < 2; ++j) {
        EXPECT_EQ(fit.hazard_ratios[j], std::exp(fit.coefficients[j]));
    }
}

TEST(LinearCph, RescalingFeatureRescalesCoefficient) {
    auto data = testutil::random_dataset(120, 2, 0.2, 77);
    const auto fit = fit_linear_cph(data);

    SurvivalDataset scaled = data;
    scaled.features.col(0) *= 100.0;
    const auto fit_scaled = fit_linear_cph(scaled);

    EXPECT_NEAR(fit_scaled.coefficients[0], fit.coefficients[0] / 100.0,
                1e-7 * std::abs(fit.coefficients[0]) + 1e-10);
    EXPECT_NEAR(fit_scaled.coefficients[1], fit.coefficients[1],
                1e-7 * std::abs(fit.coefficients[1]) + 1e-10);
    EXPECT_NEAR(fit_scaled.p_values[0], fit.p_values[0], 1e-7);
    EXPECT_NEAR(fit_scaled.log_likelihood, fit.log_likelihood,
                1e-9 * std::abs(fit.log_likelihood));
}

TEST(LinearCph, CollinearFeaturesRaiseNumericalError) {
    auto data = testutil::random_dataset(50, 2, 0.2, 3);
    data.features.conservativeResize(Eigen::NoChange, 3);
    data.features.col(2) = data.features.col(0);
    data.feature_names.push_back("x0_copy");
    try {
        fit_linear_cph(data);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("collinear"), std::string::npos);
    }
    // ridge makes the same problem solvable
    LinearCphOptions opts;
    opts.ridge = 1e-4;
    const auto fit = fit_linear_cph(data, opts);
    EXPECT_TRUE(fit.converged);
    EXPECT_TRUE(fit.ridge_applied);
}

TEST(LinearCph, PredictRiskChecksDimensions) {
    const auto data = testutil::random_dataset(40, 3, 0.2, 4);
    const auto fit = fit_linear_cph(data);
    const Matrix wrong = Matrix::Random(5, 2);
    EXPECT_THROW(predict_risk(fit, wrong), ValidationError);
    const RiskScores scores = predict_risk(fit, data.features);
    const RiskScores direct = data.features * fit.coefficients;
    EXPECT_TRUE((scores.array() == direct.array()).all());
}

TEST(LinearCph, BackwardEliminationDropsNoise) {
    SyntheticSpec spec;
    spec.n_samples = 600;
    spec.n_features = 5;
    spec.risk = RiskKind::linear;
    spec.coefficients = Vector(5);
    spec.coefficients << 1.0, -0.8, 0.0, 0.0, 0.0;
    spec.censoring_rate = 0.2;
    spec.seed = 14;
    auto [data, truth] = generate_synthetic(spec);
    data.feature_names = {"a", "b", "c", "d", "e"};

    const auto result = backward_eliminate(data, 0.05);
    const auto& kept = result.fit.feature_names;
    EXPECT_NE(std::find(kept.begin(), kept.end(), "a"), kept.end());
    EXPECT_NE(std::find(kept.begin(), kept.end(), "b"), kept.end());
    for (Eigen::Index j = 0; j < result.fit.p_values.size(); ++j)
        EXPECT_LE(result.fit.p_values[j], 0.05);
    // one removal record per dropped feature
    EXPECT_EQ(result.removed.size(), 5u - kept.size());
    EXPECT_EQ(result.kept.size(), kept.size());
}

TEST(LinearCph, BackwardEliminationToNullModelIsAnError) {
    // Impossible alpha forces every feature out.
    const auto data = testutil::random_dataset(80, 2, 0.2, 6);
    EXPECT_THROW(backward_eliminate(data, 1e-12), ValidationError);
}

TEST(LinearCph, FitTableRendersSmallPValues) {
    LinearCphFit fit;
    fit.feature_names = {"speed_limit", "weather: Snowy"};
    fit.coefficients = Vector(2);
    fit.coefficients << 0.21, -1.4;
    fit.standard_errors = Vector(2);
    fit.standard_errors << 0.05, 0.2;
    fit.hazard_ratios = Vector(2);
    fit.hazard_ratios << std::exp(0.21), std::exp(-1.4);
    fit.p_values = Vector(2);
    fit.p_values << 0.031, 1.2e-7;
    fit.log_likelihood = -100.0;
    const std::string table = format_fit_table(fit);
    EXPECT_NE(table.find("speed_limit"), std::string::npos);
    EXPECT_NE(table.find("weather: Snowy"), std::string::npos);
    EXPECT_NE(table.find("<0.005"), std::string::npos);
    EXPECT_NE(table.find("0.031"), std::string::npos);
}

TEST(LinearCph, SaveLoadRoundTripsBitExact) {
    const auto data = testutil::random_dataset(70, 3, 0.2, 9);
    const auto fit = fit_linear_cph(data);
    const auto path = std::filesystem::temp_directory_path() /
                      "deepwait-test-cph-model.txt";
    save_fit(fit, path);
    const auto loaded = load_fit(path);
    std::filesystem::remove(path);
    EXPECT_EQ(loaded.feature_names, fit.feature_names);
    for (int j = 0; j < 3; ++j) {
        EXPECT_EQ(loaded.coefficients[j], fit.coefficients[j]);
        EXPECT_EQ(loaded.standard_errors[j], fit.standard_errors[j]);
        EXPECT_EQ(loaded.p_values[j], fit.p_values[j]);
        EXPECT_EQ(loaded.hazard_ratios[j], fit.hazard_ratios[j]);
    }
    EXPECT_EQ(loaded.log_likelihood, fit.log_likelihood);
}

TEST(LinearCph, TiesHandledConsistentlyWithLikelihood) {
    // Heavy ties; the fitted optimum must still zero the independent gradient.
    const auto data = testutil::random_tied_dataset(200, 3, 0.3, 55);
    const auto fit = fit_linear_cph(data);
    ASSERT_TRUE(fit.converged);
    const Vector score = data.features.transpose() *
                         nll_gradient(data, data.features * fit.coefficients);
    EXPECT_LT(score.norm(), 1e-5);
}
