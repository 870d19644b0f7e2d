#include "deepwait/network.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "deepwait/linear_cph.hpp"
#include "deepwait/synthetic.hpp"
#include "testutil.hpp"

using namespace deepwait;

namespace {

NetworkConfig small_config(int n_inputs, std::vector<int> hidden, std::uint64_t seed) {
    NetworkConfig config;
    config.n_inputs = n_inputs;
    config.hidden_layers = std::move(hidden);
    config.learning_rate = 1e-3;
    config.epochs = 10;
    config.seed = seed;
    return config;
}

// Total training loss at the network's current parameters, deterministic
// (train-mode forward, dropout off).
double training_loss(const RiskNetwork& net, const SurvivalDataset& data) {
    const auto cache = detail::forward_pass(net, data.features, true, nullptr);
    const auto ord = detail::make_order(data.durations, data.events);
    const auto terms = detail::accumulate_terms(ord, data.durations, data.events, cache.scores);
    return detail::nll_from_terms(ord, terms) + detail::l2_penalty(net);
}

detail::Gradients analytic_gradients(const RiskNetwork& net, const SurvivalDataset& data) {
    const auto cache = detail::forward_pass(net, data.features, true, nullptr);
    const auto ord = detail::make_order(data.durations, data.events);
    const auto terms = detail::accumulate_terms(ord, data.durations, data.events, cache.scores);
    const Vector d_scores = detail::gradient_from_terms(ord, terms, data.events, cache.scores);
    auto grads = detail::backward_pass(net, cache, d_scores);
    for (std::size_t l = 0; l < net.weights.size(); ++l)
        grads.d_weights[l] += 2.0 * net.config.l2_coefficient * net.weights[l];
    return grads;
}

// Central finite differences against every parameter reached through `get`.
void check_gradient(RiskNetwork& net, const SurvivalDataset& data, double* param,
                    double analytic, double& worst) {
    const double step = 1e-5;
    const double saved = *param;
    *param = saved + step;
    const double hi = training_loss(net, data);
    *param = saved - step;
    const double lo = training_loss(net, data);
    *param = saved;
    const double fd = (hi - lo) / (2.0 * step);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
    worst = std::max(worst, std::abs(fd - analytic) / scale);
}

double worst_gradient_error(RiskNetwork& net, const SurvivalDataset& data) {
    const auto grads = analytic_gradients(net, data);
    double worst = 0.0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i)
            for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j)
                check_gradient(net, data, &net.weights[l](i, j), grads.d_weights[l](i, j), worst);
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            check_gradient(net, data, &net.biases[l][i], grads.d_biases[l][i], worst);
    }
    for (std::size_t l = 0; l < net.norms.size(); ++l) {
        for (Eigen::Index i = 0; i < net.norms[l].gamma.size(); ++i)
            check_gradient(net, data, &net.norms[l].gamma[i], grads.d_gamma[l][i], worst);
        for (Eigen::Index i = 0; i < net.norms[l].beta.size(); ++i)
            check_gradient(net, data, &net.norms[l].beta[i], grads.d_beta[l][i], worst);
    }
    return worst;
}

}  // namespace

TEST(NetworkInit, DeterministicUnderSeed) {
    const auto config = small_config(4, {8, 8}, 33);
    const auto a = init_network(config);
    const auto b = init_network(config);
    ASSERT_EQ(a.weights.size(), 3u);
    for (std::size_t l = 0; l < a.weights.size(); ++l) {
        EXPECT_TRUE((a.weights[l].array() == b.weights[l].array()).all());
        EXPECT_TRUE((a.biases[l].array() == 0.0).all());
    }
    auto other = config;
    other.seed = 34;
    const auto c = init_network(other);
    EXPECT_FALSE((a.weights[0].array() == c.weights[0].array()).all());
}

TEST(NetworkInit, GlorotBoundsRespected) {
    const auto net = init_network(small_config(10, {20}, 1));
    const double limit0 = std::sqrt(6.0 / (10 + 20));
    EXPECT_LE(net.weights[0].cwiseAbs().maxCoeff(), limit0);
    const double limit1 = std::sqrt(6.0 / (20 + 1));
    EXPECT_LE(net.weights[1].cwiseAbs().maxCoeff(), limit1);
}

TEST(NetworkInit, WinningArchitectureParameterCount) {
    const auto net = init_network(small_config(17, {75, 75, 75}, 5));
    EXPECT_EQ(net.parameter_count(), 12826);
}

TEST(NetworkInit, ConfigValidation) {
    auto config = small_config(4, {}, 1);
    EXPECT_THROW(init_network(config), ValidationError);
    config = small_config(4, {8}, 1);
    config.dropout_rate = 1.0;
    EXPECT_THROW(config.validate(), ValidationError);
    config = small_config(4, {8}, 1);
    config.momentum = -0.1;
    EXPECT_THROW(config.validate(), ValidationError);
    config = small_config(4, {8}, 1);
    config.learning_rate = 0.0;
    EXPECT_THROW(config.validate(), ValidationError);
    config = small_config(4, {0}, 1);
    EXPECT_THROW(config.validate(), ValidationError);
    config = small_config(4, {8}, 1);
    config.epochs = 0;
    EXPECT_THROW(config.validate(), ValidationError);
}

TEST(NetworkForward, NoDropoutTrainMatchesEval) {
    const auto net = init_network(small_config(3, {6, 6}, 2));
    const Matrix X = Matrix::Random(15, 3);
    Rng rng(1);
    const RiskScores train_scores = forward_train(net, X, rng);
    const RiskScores eval_scores = predict(net, X);
    EXPECT_TRUE((train_scores.array() == eval_scores.array()).all());
}

TEST(NetworkForward, ZeroWeightsEmitOutputBias) {
    auto net = init_network(small_config(5, {7}, 3));
    for (auto& w : net.weights) w.setZero();
    net.biases[1][0] = 3.25;
    const Matrix X = Matrix::Random(9, 5);
    const RiskScores scores = predict(net, X);
    for (int i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(scores[i], 3.25);
}

TEST(NetworkForward, EvalIsDeterministic) {
    const auto net = init_network(small_config(4, {10}, 4));
    const Matrix X = Matrix::Random(20, 4);
    const RiskScores a = predict(net, X);
    const RiskScores b = predict(net, X);
    EXPECT_TRUE((a.array() == b.array()).all());
}

TEST(NetworkForward, DimensionMismatchRejected) {
    const auto net = init_network(small_config(4, {5}, 6));
    EXPECT_THROW(predict(net, Matrix::Random(3, 7)), ValidationError);
}

TEST(NetworkForward, ConstantScoresGiveCIndexHalf) {
    auto net = init_network(small_config(3, {5}, 7));
    for (auto& w : net.weights) w.setZero();
    const auto data = testutil::random_dataset(30, 3, 0.2, 8);
    EXPECT_DOUBLE_EQ(c_index(predict(net, data.features), data), 0.5);
}

TEST(NetworkGradient, MatchesFiniteDifferencesPlain) {
    auto config = small_config(4, {6, 5}, 11);
    config.l2_coefficient = 0.01;
    auto net = init_network(config);
    // zero biases park some pre-activations exactly on the ReLU kink, where
    // the finite-difference step straddles the subgradient; nudge them off
    Rng rng(42);
    for (auto& b : net.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * rng.normal();
    const auto data = testutil::random_tied_dataset(25, 4, 0.2, 12);
    EXPECT_LT(worst_gradient_error(net, data), 1e-4);
}

TEST(NetworkGradient, MatchesFiniteDifferencesWithBatchNorm) {
    auto config = small_config(3, {6}, 13);
    config.batch_norm = true;
    config.l2_coefficient = 0.005;
    auto net = init_network(config);
    // nudge the normalization parameters off their init so their gradients
    // flow through non-trivial values (beta != 0 also keeps pre-activations
    // off the ReLU kink)
    net.norms[0].gamma.array() += 0.3;
    net.norms[0].beta.array() -= 0.2;
    Rng rng(43);
    for (auto& b : net.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = 0.1 * rng.normal();
    const auto data = testutil::random_dataset(30, 3, 0.2, 14);
    EXPECT_LT(worst_gradient_error(net, data), 1e-4);
}

TEST(NetworkDropout, TrainModeIsUnbiased) {
    auto config = small_config(4, {16}, 15);
    config.dropout_rate = 0.4;
    auto net = init_network(config);
    // positive weights and inputs keep the output far from zero, so relative
    // error is meaningful
    for (auto& w : net.weights) w = w.cwiseAbs();
    const Matrix X = Matrix::Ones(1, 4);
    const double eval_out = predict(net, X)[0];
    ASSERT_GT(eval_out, 0.1);

    Rng rng(99);
    double sum = 0.0;
    const int n_masks = 10000;
    for (int rep = 0; rep < n_masks; ++rep) sum += forward_train(net, X, rng)[0];
    const double mean = sum / n_masks;
    EXPECT_NEAR(mean / eval_out, 1.0, 0.02);
}

TEST(NetworkTrain, LossTraceLengthEqualsEpochs) {
    auto config = small_config(3, {8}, 16);
    config.epochs = 25;
    config.dropout_rate = 0.2;
    auto net = init_network(config);
    const auto data = testutil::random_dataset(60, 3, 0.2, 17);
    const auto result = train_network(net, data);
    ASSERT_EQ(result.loss_trace.size(), 25u);
    for (const double loss : result.loss_trace) EXPECT_TRUE(std::isfinite(loss));
    EXPECT_EQ(result.best_epoch, -1);
}

TEST(NetworkTrain, SmallRateLossNonIncreasing) {
    auto config = small_config(3, {10}, 18);
    config.learning_rate = 1e-4;
    config.epochs = 10;
    auto net = init_network(config);
    const auto data = testutil::random_dataset(80, 3, 0.25, 19);
    const auto result = train_network(net, data);
    for (std::size_t e = 1; e < result.loss_trace.size(); ++e)
        EXPECT_LE(result.loss_trace[e], result.loss_trace[e - 1] + 1e-12)
            << "epoch " << e;
}

TEST(NetworkTrain, DeterministicWithSeed) {
    auto config = small_config(3, {8, 8}, 20);
    config.dropout_rate = 0.3;
    config.momentum = 0.9;
    config.lr_decay = 0.01;
    config.epochs = 15;
    const auto data = testutil::random_dataset(50, 3, 0.2, 21);

    auto a = init_network(config);
    const auto ra = train_network(a, data);
    auto b = init_network(config);
    const auto rb = train_network(b, data);
    ASSERT_EQ(ra.loss_trace.size(), rb.loss_trace.size());
    for (std::size_t e = 0; e < ra.loss_trace.size(); ++e)
        EXPECT_EQ(ra.loss_trace[e], rb.loss_trace[e]);
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        EXPECT_TRUE((a.weights[l].array() == b.weights[l].array()).all());
}

TEST(NetworkTrain, HugeL2ShrinksWeights) {
    auto config = small_config(3, {8}, 22);
    config.l2_coefficient = 1e6;
    config.learning_rate = 2e-7;  // keeps lr * 2 * l2 < 1 so the decay converges
    config.epochs = 200;
    auto net = init_network(config);
    const double initial_norm = net.weights[0].norm();
    const auto data = testutil::random_dataset(40, 3, 0.2, 23);
    train_network(net, data);
    EXPECT_LT(net.weights[0].norm(), 1e-3 * initial_norm);
    const RiskScores scores = predict(net, data.features);
    EXPECT_LT(scores.maxCoeff() - scores.minCoeff(), 1e-3);
}

TEST(NetworkTrain, ExplodingRateAbortsWithEpoch) {
    auto config = small_config(3, {8}, 24);
    config.learning_rate = 1e12;
    config.epochs = 50;
    auto net = init_network(config);
    const auto data = testutil::random_dataset(40, 3, 0.2, 25);
    try {
        train_network(net, data);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("epoch"), std::string::npos);
        EXPECT_NE(what.find("learning rate"), std::string::npos);
    }
}

TEST(NetworkTrain, ValidationSnapshotKeepsBestEpoch) {
    auto config = small_config(3, {10}, 26);
    config.epochs = 40;
    config.learning_rate = 5e-3;
    const auto data = testutil::random_dataset(120, 3, 0.2, 27);
    const auto val = testutil::random_dataset(60, 3, 0.2, 28);

    auto net = init_network(config);
    const auto result = train_network(net, data, &val);
    ASSERT_GE(result.best_epoch, 0);
    ASSERT_LT(result.best_epoch, 40);
    // the returned parameters are the snapshot: re-scoring reproduces the max
    const double c = c_index(predict(net, val.features), val);
    EXPECT_DOUBLE_EQ(c, result.best_validation_c);

    // and the snapshot beats (or ties) a full-length run's final parameters
    auto final_net = init_network(config);
    train_network(final_net, data);
    const double final_c = c_index(predict(final_net, val.features), val);
    EXPECT_GE(result.best_validation_c, final_c - 1e-12);
}

TEST(NetworkTrain, RecoverableOnLinearTruth) {
    SyntheticSpec spec;
    spec.n_samples = 400;
    spec.n_features = 4;
    spec.risk = RiskKind::linear;
    spec.coefficients = Vector(4);
    spec.coefficients << 1.0, -0.8, 0.5, 0.0;
    spec.censoring_rate = 0.2;
    spec.seed = 29;
    const auto [data, truth] = generate_synthetic(spec);

    auto config = small_config(4, {16, 16}, 30);
    config.learning_rate = 1e-2;
    config.lr_decay = 0.002;
    config.epochs = 300;
    auto net = init_network(config);
    train_network(net, data);

    const RiskScores scores = predict(net, data.features);
    const double corr =
        ((scores.array() - scores.mean()) * (truth.log_risk.array() - truth.log_risk.mean()))
            .mean() /
        (std::sqrt((scores.array() - scores.mean()).square().mean()) *
         std::sqrt((truth.log_risk.array() - truth.log_risk.mean()).square().mean()));
    EXPECT_GT(corr, 0.8);
}

TEST(NetworkSerialization, RoundTripReproducesEvalBitForBit) {
    auto config = small_config(4, {9, 7}, 31);
    config.dropout_rate = 0.25;
    config.batch_norm = true;
    config.epochs = 12;
    config.momentum = 0.5;
    auto net = init_network(config);
    const auto data = testutil::random_dataset(50, 4, 0.2, 32);
    train_network(net, data);  // populate running statistics

    const auto path =
        std::filesystem::temp_directory_path() / "deepwait-test-network.txt";
    save_network(net, path);
    const auto loaded = load_network(path);
    std::filesystem::remove(path);

    EXPECT_EQ(loaded.config.hidden_layers, net.config.hidden_layers);
    EXPECT_EQ(loaded.config.batch_norm, true);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        EXPECT_TRUE((loaded.weights[l].array() == net.weights[l].array()).all());
        EXPECT_TRUE((loaded.biases[l].array() == net.biases[l].array()).all());
    }
    for (std::size_t l = 0; l < net.norms.size(); ++l) {
        EXPECT_TRUE(
            (loaded.norms[l].running_mean.array() == net.norms[l].running_mean.array()).all());
        EXPECT_TRUE(
            (loaded.norms[l].running_var.array() == net.norms[l].running_var.array()).all());
    }

    const Matrix X = Matrix::Random(25, 4);
    const RiskScores a = predict(net, X);
    const RiskScores b = predict(loaded, X);
    EXPECT_TRUE((a.array() == b.array()).all());
}

TEST(NetworkSerialization, RejectsWrongHeader) {
    const auto path =
        std::filesystem::temp_directory_path() / "deepwait-test-bad-network.txt";
    {
        std::ofstream out(path);
        out << "not a network\n";
    }
    EXPECT_THROW(load_network(path), IoError);
    std::filesystem::remove(path);
}
