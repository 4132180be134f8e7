// Copyright (C) 2026 The memo Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "memo/rectified_flow.hpp"
#include "test_support.hpp"

namespace memo {
namespace {

TEST(LossWeight, ExactValues) {
    EXPECT_EQ(loss_weight(0.0), 1.0);
    EXPECT_EQ(loss_weight(0.5), 4.0);
    EXPECT_DOUBLE_EQ(loss_weight(0.9), 100.0);
}

TEST(LossWeight, StrictlyIncreasing) {
    double prev = loss_weight(0.0);
    for (int i = 1; i < 1000; ++i) {
        const double w = loss_weight(0.999 * i / 999.0);
        EXPECT_GT(w, prev);
        prev = w;
    }
}

TEST(LossWeight, RejectsOutOfRange) {
    EXPECT_THROW(loss_weight(1.0), std::domain_error);
    EXPECT_THROW(loss_weight(-0.1), std::domain_error);
    EXPECT_THROW(loss_weight(NAN), std::domain_error);
}

TEST(Interpolate, Examples) {
    EXPECT_EQ(interpolate(std::vector<double>{4.0}, std::vector<double>{0.0}, 0.25), Vector{3.0});
    const Vector z0{1.5, -2.0, 3.25};
    EXPECT_EQ(interpolate(z0, std::vector<double>{7.0, 8.0, 9.0}, 0.0), z0);
    const Vector eps{0.3, -1.7};
    const Vector got = interpolate(std::vector<double>{0.0, 0.0}, eps, 0.999);
    EXPECT_EQ(got[0], 0.999 * eps[0]);
    EXPECT_EQ(got[1], 0.999 * eps[1]);
}

TEST(Interpolate, Errors) {
    EXPECT_THROW(interpolate(std::vector<double>{1.0}, std::vector<double>{1.0}, 1.0), std::domain_error);
    EXPECT_THROW(interpolate(std::vector<double>{1.0}, std::vector<double>{1.0}, -0.5), std::domain_error);
    EXPECT_THROW(interpolate(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 0.5), std::invalid_argument);
}

TEST(DiffusionSample, MakeInterpolates) {
    const auto s = DiffusionSample::make({2.0}, {6.0}, 0.5);
    EXPECT_EQ(s.z_t, Vector{4.0});
}

TEST(FlowLoss, Examples) {
    EXPECT_EQ(flow_loss(std::vector<double>{0.0}, std::vector<double>{1.0}, 0.5), 4.0);
    const Vector eps{0.1, 0.2, -0.3};
    EXPECT_EQ(flow_loss(eps, eps, 0.97), 0.0);
}

TEST(FlowLoss, MeanReduction) {
    const Vector pred{0.0, 0.0};
    const Vector eps{1.0, 3.0};
    EXPECT_EQ(flow_loss(pred, eps, 0.0, LossReduction::sum), 10.0);
    EXPECT_EQ(flow_loss(pred, eps, 0.0, LossReduction::mean), 5.0);
}

TEST(FlowLoss, RejectsSingularT) {
    EXPECT_THROW(flow_loss(std::vector<double>{0.0}, std::vector<double>{1.0}, 1.0), std::domain_error);
}

TEST(FlowLoss, MatchesOracleOnRandomInputs) {
    SeededRng rng(101);
    for (int c = 0; c < 100; ++c) {
        const std::size_t n = 1 + rng.index(20);
        const auto pred = rng.normal_vector(n);
        const auto eps = rng.normal_vector(n);
        const double t = 0.99 * rng.uniform();
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (eps[i] - pred[i]) * (eps[i] - pred[i]);
        const double want = s / ((1.0 - t) * (1.0 - t));
        EXPECT_LT(test::rel_err(flow_loss(pred, eps, t), want), 1e-12);
    }
}

TEST(CfgBlend, Examples) {
    EXPECT_EQ(cfg_blend(std::vector<double>{1.0}, std::vector<double>{0.5}, 3.5), Vector{2.75});
    EXPECT_EQ(kDefaultCfgScale, 3.5);
}

TEST(CfgBlend, EndpointsExact) {
    SeededRng rng(103);
    for (int c = 0; c < 100; ++c) {
        const auto a = rng.normal_vector(8, 10.0);
        const auto b = rng.normal_vector(8, 10.0);
        EXPECT_EQ(cfg_blend(a, b, 0.0), a);
        EXPECT_EQ(cfg_blend(a, b, -1.0), b);
        EXPECT_EQ(cfg_blend(a, a, 3.5), a);
    }
}

TEST(CfgBlend, LinearInInputs) {
    SeededRng rng(107);
    for (int c = 0; c < 100; ++c) {
        const auto a1 = rng.normal_vector(6);
        const auto b1 = rng.normal_vector(6);
        const auto a2 = rng.normal_vector(6);
        const auto b2 = rng.normal_vector(6);
        const double w = 8.0 * rng.uniform() - 2.0;
        const double alpha = rng.normal();
        const double beta = rng.normal();
        Vector a(6), b(6);
        for (std::size_t i = 0; i < 6; ++i) {
            a[i] = alpha * a1[i] + beta * a2[i];
            b[i] = alpha * b1[i] + beta * b2[i];
        }
        const auto lhs = cfg_blend(a, b, w);
        const auto r1 = cfg_blend(a1, b1, w);
        const auto r2 = cfg_blend(a2, b2, w);
        for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_NEAR(lhs[i], alpha * r1[i] + beta * r2[i], 1e-12 * (1.0 + std::abs(lhs[i])));
            EXPECT_NEAR(r1[i], (1.0 + w) * a1[i] - w * b1[i], 1e-12 * (1.0 + std::abs(r1[i])));
        }
    }
}

TEST(CfgBlend, DimensionMismatchThrows) {
    EXPECT_THROW(cfg_blend(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}, 1.0), std::invalid_argument);
}

TEST(ConditionDropout, ZeroProbabilityUnchanged) {
    SeededRng rng(109);
    ConditionSet c;
    c.reference = {1.0, 2.0};
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(condition_dropout(c, rng, 0.0).dropped, 0);
}

TEST(ConditionDropout, NearOneDropsEverything) {
    SeededRng rng(113);
    const std::uint8_t all = condition_bit(ConditionKind::emotion) | condition_bit(ConditionKind::reference) |
                             condition_bit(ConditionKind::audio) | condition_bit(ConditionKind::past_frames);
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(condition_dropout(ConditionSet{}, rng, 1.0 - 1e-12).dropped, all);
}

TEST(ConditionDropout, FrequencyNearP) {
    SeededRng rng(127);
    std::array<std::size_t, kConditionKinds> hits{};
    const std::size_t n = 100000;
    for (std::size_t i = 0; i < n; ++i) {
        const auto d = condition_dropout(ConditionSet{}, rng, 0.05);
        for (std::size_t k = 0; k < kConditionKinds; ++k)
            if (d.is_dropped(static_cast<ConditionKind>(k))) ++hits[k];
    }
    for (std::size_t k = 0; k < kConditionKinds; ++k) {
        const double f = static_cast<double>(hits[k]) / static_cast<double>(n);
        EXPECT_GE(f, 0.045) << k;
        EXPECT_LE(f, 0.055) << k;
    }
}

TEST(ConditionDropout, DeterministicGivenRng) {
    SeededRng a(131), b(131);
    for (int i = 0; i < 200; ++i) EXPECT_EQ(condition_dropout({}, a, 0.3).dropped, condition_dropout({}, b, 0.3).dropped);
}

TEST(ConditionDropout, RejectsBadProbability) {
    SeededRng rng(1);
    EXPECT_THROW(condition_dropout({}, rng, 1.0), std::invalid_argument);
    EXPECT_THROW(condition_dropout({}, rng, -0.1), std::invalid_argument);
}

TEST(RobustFilter, Fixture) {
    EXPECT_EQ(robust_filter(0.03), (RobustVerdict{RobustDecision::keep, false}));
    EXPECT_EQ(robust_filter(0.11), (RobustVerdict{RobustDecision::skip, false}));
    EXPECT_EQ(robust_filter(0.1), (RobustVerdict{RobustDecision::keep, false}));
    EXPECT_EQ(robust_filter(NAN), (RobustVerdict{RobustDecision::skip, true}));
    EXPECT_EQ(robust_filter(std::numeric_limits<double>::infinity()), (RobustVerdict{RobustDecision::skip, true}));
}

TEST(RobustFilter, CustomThreshold) {
    EXPECT_EQ(robust_filter(5000.0, 5000.0).decision, RobustDecision::keep);
    EXPECT_EQ(robust_filter(5000.5, 5000.0).decision, RobustDecision::skip);
}

TEST(RobustFilter, NegativeLossThrows) {
    EXPECT_THROW(robust_filter(-1.0), std::invalid_argument);
}

TEST(LossReductionNames, RoundTrip) {
    for (auto r : {LossReduction::sum, LossReduction::mean}) EXPECT_EQ(parse_loss_reduction(to_string(r)), r);
    EXPECT_THROW(parse_loss_reduction("median"), std::invalid_argument);
}

}  // namespace
}  // namespace memo
