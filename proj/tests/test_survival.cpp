#include "deepwait/survival.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "testutil.hpp"

using namespace deepwait;

namespace {

SurvivalDataset tiny(std::vector<double> durations, std::vector<int> events) {
    SurvivalDataset d;
    const int n = static_cast<int>(durations.size());
    d.features = Matrix::Zero(n, 1);
    d.feature_names = {"x0"};
    d.durations = Eigen::Map<Vector>(durations.data(), n);
    d.events = Eigen::Map<IntVector>(events.data(), n);
    return d;
}

}  // namespace

TEST(RiskSets, AllEventsDistinctTimes) {
    auto sets = risk_sets(tiny({1, 2, 3}, {1, 1, 1}));
    ASSERT_EQ(sets.size(), 3u);
    EXPECT_EQ(sets[0].time, 1.0);
    EXPECT_EQ(sets[0].event_indices, (std::vector<int>{0}));
    EXPECT_EQ(sets[0].at_risk_indices, (std::vector<int>{0, 1, 2}));
    EXPECT_EQ(sets[1].at_risk_indices, (std::vector<int>{1, 2}));
    EXPECT_EQ(sets[2].at_risk_indices, (std::vector<int>{2}));
}

TEST(RiskSets, TiedEventsShareOneEntry) {
    auto sets = risk_sets(tiny({2, 2, 5}, {1, 1, 0}));
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].time, 2.0);
    EXPECT_EQ(sets[0].event_indices, (std::vector<int>{0, 1}));
    EXPECT_EQ(sets[0].at_risk_indices, (std::vector<int>{0, 1, 2}));
}

TEST(RiskSets, CensoredSampleStaysAtRisk) {
    auto sets = risk_sets(tiny({3, 1}, {0, 1}));
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].time, 1.0);
    EXPECT_EQ(sets[0].event_indices, (std::vector<int>{1}));
    EXPECT_EQ(sets[0].at_risk_indices, (std::vector<int>{0, 1}));
}

TEST(RiskSets, NoEventsIsAnError) {
    EXPECT_THROW(risk_sets(tiny({1, 2}, {0, 0})), ValidationError);
}

TEST(RiskSets, EventsAppearOnceAndSetsAreNested) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto data = testutil::random_tied_dataset(60, 2, 0.3, seed);
        auto sets = risk_sets(data);
        int total_events = 0;
        for (std::size_t ti = 0; ti < sets.size(); ++ti) {
            total_events += static_cast<int>(sets[ti].event_indices.size());
            if (ti + 1 < sets.size()) {
                for (int idx : sets[ti + 1].at_risk_indices) {
                    bool in_prev = std::find(sets[ti].at_risk_indices.begin(),
                                             sets[ti].at_risk_indices.end(),
                                             idx) != sets[ti].at_risk_indices.end();
                    EXPECT_TRUE(in_prev);
                }
            }
        }
        EXPECT_EQ(total_events, data.n_events());
    }
}

TEST(NegLogPartialLikelihood, ZeroScoresReduceToLogRiskSetSizes) {
    auto data = tiny({1, 2, 3}, {1, 1, 1});
    RiskScores scores = Vector::Zero(3);
    EXPECT_NEAR(neg_log_partial_likelihood(data, scores), std::log(3.0) + std::log(2.0), 1e-12);
}

TEST(NegLogPartialLikelihood, HandEvaluatedScores) {
    auto data = tiny({1, 2, 3}, {1, 1, 1});
    RiskScores scores(3);
    scores << std::log(2.0), 0.0, 0.0;
    // -[ln(2/4) + ln(1/2) + ln(1/1)] = 2 ln 2
    EXPECT_NEAR(neg_log_partial_likelihood(data, scores), 2.0 * std::log(2.0), 1e-12);
}

TEST(NegLogPartialLikelihood, InvariantUnderScoreShift) {
    auto data = testutil::random_tied_dataset(40, 2, 0.25, 7);
    RiskScores scores = Vector::Random(40);
    const double base = neg_log_partial_likelihood(data, scores);
    const Vector grad = nll_gradient(data, scores);
    RiskScores shifted = scores.array() + 13.75;
    EXPECT_NEAR(neg_log_partial_likelihood(data, shifted), base, 1e-9 * std::abs(base));
    const Vector grad_shifted = nll_gradient(data, shifted);
    EXPECT_LT((grad - grad_shifted).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(NegLogPartialLikelihood, NonNegativeOnRandomInstances) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto data = testutil::random_tied_dataset(30, 2, 0.4, seed);
        RiskScores scores = 3.0 * Vector::Random(30);
        EXPECT_GE(neg_log_partial_likelihood(data, scores), 0.0);
    }
}

TEST(NegLogPartialLikelihood, StableForLargeScores) {
    auto data = tiny({1, 2, 3, 4}, {1, 1, 1, 1});
    RiskScores scores(4);
    scores << 700.0, -700.0, 650.0, 0.0;
    const double nll = neg_log_partial_likelihood(data, scores);
    EXPECT_TRUE(std::isfinite(nll));
    EXPECT_GE(nll, 0.0);
    const Vector grad = nll_gradient(data, scores);
    EXPECT_TRUE(grad.allFinite());
}

TEST(NegLogPartialLikelihood, RejectsBadInput) {
    auto data = tiny({1, 2}, {1, 1});
    RiskScores scores(2);
    scores << 0.0, std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(neg_log_partial_likelihood(data, scores), ValidationError);
    EXPECT_THROW(neg_log_partial_likelihood(tiny({1, 2}, {0, 0}), Vector::Zero(2)),
                 ValidationError);
}

TEST(NegLogPartialLikelihood, EarlyCensoredSampleIsInert) {
    auto data = testutil::random_dataset(25, 2, 0.2, 11);
    RiskScores scores = Vector::Random(25);
    const double base = neg_log_partial_likelihood(data, scores);

    // Append a censored sample with duration below every event time.
    double min_event = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 25; ++i)
        if (data.events[i]) min_event = std::min(min_event, data.durations[i]);
    SurvivalDataset extended = data;
    extended.features.conservativeResize(26, Eigen::NoChange);
    extended.features.row(25).setZero();
    extended.durations.conservativeResize(26);
    extended.durations[25] = min_event / 2.0;
    extended.events.conservativeResize(26);
    extended.events[25] = 0;
    RiskScores extended_scores(26);
    extended_scores << scores, 4.2;

    EXPECT_DOUBLE_EQ(neg_log_partial_likelihood(extended, extended_scores), base);
}

TEST(NllGradient, HandDifferentiatedCase) {
    auto data = tiny({1, 2}, {1, 1});
    const Vector grad = nll_gradient(data, Vector::Zero(2));
    EXPECT_NEAR(grad[0], -0.5, 1e-12);
    EXPECT_NEAR(grad[1], 0.5, 1e-12);
}

TEST(NllGradient, SumsToZero) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto data = testutil::random_tied_dataset(35, 2, 0.3, seed);
        RiskScores scores = 2.0 * Vector::Random(35);
        EXPECT_NEAR(nll_gradient(data, scores).sum(), 0.0, 1e-10);
    }
}

TEST(NllGradient, MatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        auto data = seed % 2 ? testutil::random_tied_dataset(20, 2, 0.25, seed)
                             : testutil::random_dataset(20, 2, 0.25, seed);
        RiskScores scores = Vector::Random(20);
        const Vector analytic = nll_gradient(data, scores);
        const Vector numeric = testutil::fd_nll_gradient(data, scores);
        EXPECT_LT(testutil::max_relative_error(analytic, numeric), 1e-6);
    }
}

TEST(BreslowBaseline, HandEvaluatedCase) {
    auto hazard = breslow_baseline(tiny({1, 2}, {1, 1}), Vector::Zero(2));
    ASSERT_EQ(hazard.event_times, (std::vector<double>{1, 2}));
    EXPECT_NEAR(hazard.cumulative_hazard[0], 0.5, 1e-12);
    EXPECT_NEAR(hazard.cumulative_hazard[1], 1.5, 1e-12);
}

TEST(BreslowBaseline, SingleEventAmongN) {
    auto data = tiny({5, 5, 5, 5, 5}, {1, 0, 0, 0, 0});
    auto hazard = breslow_baseline(data, Vector::Zero(5));
    ASSERT_EQ(hazard.cumulative_hazard.size(), 1u);
    EXPECT_NEAR(hazard.cumulative_hazard[0], 0.2, 1e-12);
}

TEST(BreslowBaseline, DoublingExpScoresHalvesIncrements) {
    auto data = testutil::random_tied_dataset(30, 2, 0.2, 3);
    RiskScores scores = Vector::Random(30);
    auto base = breslow_baseline(data, scores);
    RiskScores doubled = scores.array() + std::log(2.0);
    auto halved = breslow_baseline(data, doubled);
    ASSERT_EQ(base.cumulative_hazard.size(), halved.cumulative_hazard.size());
    for (std::size_t i = 0; i < base.cumulative_hazard.size(); ++i)
        EXPECT_NEAR(halved.cumulative_hazard[i], base.cumulative_hazard[i] / 2.0,
                    1e-12 * base.cumulative_hazard[i]);
}

TEST(BreslowBaseline, NonDecreasingAndSortedTimes) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto data = testutil::random_tied_dataset(40, 2, 0.3, seed);
        RiskScores scores = 2.0 * Vector::Random(40);
        auto hazard = breslow_baseline(data, scores);
        for (std::size_t i = 1; i < hazard.cumulative_hazard.size(); ++i) {
            EXPECT_LT(hazard.event_times[i - 1], hazard.event_times[i]);
            EXPECT_LE(hazard.cumulative_hazard[i - 1], hazard.cumulative_hazard[i]);
        }
    }
}

TEST(SurvivalDataset, ValidateCatchesBadRows) {
    auto data = tiny({1, -2}, {1, 1});
    EXPECT_THROW(data.validate(), ValidationError);
    data = tiny({1, 2}, {1, 2});
    EXPECT_THROW(data.validate(), ValidationError);
    data = tiny({1, 2}, {1, 1});
    data.feature_names = {"a", "a"};
    EXPECT_THROW(data.validate(), ValidationError);
}

TEST(SurvivalDataset, SubsetHelpers) {
    auto data = testutil::random_dataset(10, 3, 0.0, 1);
    auto rows = subset_rows(data, {1, 4, 7});
    EXPECT_EQ(rows.n_samples(), 3);
    EXPECT_EQ(rows.durations[1], data.durations[4]);
    auto cols = subset_features(data, {2, 0});
    EXPECT_EQ(cols.feature_names, (std::vector<std::string>{"x2", "x0"}));
    EXPECT_EQ(cols.features(3, 0), data.features(3, 2));
}
