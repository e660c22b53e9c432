// Copyright 2026 The noe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "core/dp_sgd.hpp"
#include "core/rdp.hpp"
#include "oracles/rdp_quadrature.hpp"
#include "test_support.hpp"

namespace noe::privacy {
namespace {

// Frozen from the quadrature accountant (oracles/rdp_quadrature.hpp) over
// the default order grid; regenerate with SigmaByQuadrature if the grid
// version changes.
constexpr double kGoldenSigmaBatch64 = 2.647896;   // N=2480, N_b=64, T=468
constexpr double kGoldenSigmaBatch24 = 1.713841;   // N=2480, N_b=24, T=1248

TEST(Clip, ScalesToBound) {
  std::vector<std::vector<double>> g{{3.0, 4.0}};
  const auto norms = ClipPerSample(g, 1.0);
  EXPECT_DOUBLE_EQ(norms[0], 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[0][1], 0.8, 1e-15);
}

TEST(Clip, LeavesSmallGradientsUnchanged) {
  std::vector<std::vector<double>> g{{0.3, 0.4}, {-2.0, 7.5}};
  const auto before = g;
  ClipPerSample(g, 1.0);
  EXPECT_EQ(g[0], before[0]);
  std::vector<std::vector<double>> big = before;
  ClipPerSample(big, 1e6);
  EXPECT_EQ(big, before);
}

TEST(Clip, RejectsNonFiniteNamingExample) {
  std::vector<std::vector<float>> g{{1.0f}, {NAN}};
  try {
    ClipPerSample(g, 1.0);
    FAIL();
  } catch (const RuntimeFailure& e) {
    EXPECT_NE(std::string(e.what()).find("example 1"), std::string::npos);
  }
  EXPECT_THROW(ClipPerSample(g, 0.0), ValidationError);
}

TEST(Noise, ZeroSigmaIsExactMean) {
  const std::vector<std::vector<double>> g{{1, 2}, {3, 4}, {5, 9}};
  Rng rng(1);
  const auto out = NoisyAggregate(g, 0.0, 1.0, 3.0, rng);
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], 5.0);
  EXPECT_THROW(NoisyAggregate(g, -1.0, 1.0, 3.0, rng), ValidationError);
}

TEST(Noise, SeededDrawsAreReproducible) {
  const std::vector<std::vector<float>> g{{1, 2, 3}};
  Rng a(7), b(7);
  EXPECT_EQ(NoisyAggregate(g, 1.3, 0.5, 4.0, a), NoisyAggregate(g, 1.3, 0.5, 4.0, b));
}

TEST(Noise, MomentsMatchUnitGaussian) {
  const int n = 100000;
  const std::vector<std::vector<double>> zero{std::vector<double>(n, 0.0)};
  Rng rng(11);
  const auto z = NoisyAggregate(zero, 1.0, 1.0, 1.0, rng);
  const double mean = std::accumulate(z.begin(), z.end(), 0.0) / n;
  double var = 0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(double(n)));
  EXPECT_NEAR(var, 1.0, 0.05);
}

TEST(Rdp, GaussianLimit) {
  EXPECT_DOUBLE_EQ(RdpSubsampledGaussian(1.0, 2.0, 4.0), 0.5);
  for (double s : {0.5, 1.0, 3.0}) {
    for (double a : {1.5, 2.0, 7.0}) {
      EXPECT_NEAR(RdpSubsampledGaussian(1.0, s, a), a / (2 * s * s),
                  1e-12 * a / (2 * s * s));
    }
  }
}

TEST(Rdp, ZeroSamplingRateIsFree) {
  for (double a : DefaultOrders()) EXPECT_EQ(RdpSubsampledGaussian(0.0, 1.0, a), 0.0);
}

TEST(Rdp, RejectsOrderAtMostOne) {
  EXPECT_THROW(RdpSubsampledGaussian(0.1, 1.0, 1.0), ValidationError);
  EXPECT_THROW(RdpSubsampledGaussian(0.1, 1.0, 0.5), ValidationError);
}

TEST(Rdp, MatchesQuadratureAtSpecPoints) {
  for (double a : {2.0, 8.0, 32.0}) {
    const double oracle = oracle::RdpByQuadrature(0.01, 1.0, a);
    EXPECT_NEAR(RdpSubsampledGaussian(0.01, 1.0, a), oracle, 1e-6 * oracle) << a;
  }
}

TEST(Rdp, FractionalOrdersMatchQuadrature) {
  for (double q : {0.005, 0.05, 0.3}) {
    for (double s : {0.8, 1.5, 3.0}) {
      for (double a : {1.5, 1.75, 2.5, 10.25}) {
        const double oracle = oracle::RdpByQuadrature(q, s, a);
        EXPECT_NEAR(RdpSubsampledGaussian(q, s, a), oracle, 1e-6 * oracle)
            << q << " " << s << " " << a;
      }
    }
  }
}

TEST(Rdp, NonNegativeAndMonotoneInOrder) {
  double prev = 0;
  for (double a : DefaultOrders()) {
    const double e = RdpSubsampledGaussian(0.02, 1.1, a);
    EXPECT_GE(e, 0.0);
    EXPECT_GE(e, prev);
    prev = e;
  }
}

TEST(Conversion, SingleOrderClosedForm) {
  const RdpProfile p{{2.0}, {0.1}};
  const auto r = RdpToEpsDelta(p, 1, std::exp(-1.0));
  EXPECT_NEAR(r.epsilon, 1.1, 1e-12);
  EXPECT_EQ(r.order, 2.0);
  EXPECT_THROW(RdpToEpsDelta(RdpProfile{}, 1, 0.1), ValidationError);
}

TEST(Conversion, DoublingStepsNeverDecreasesEpsilon) {
  for (double q : {0.001, 0.01, 0.2}) {
    for (double s : {0.7, 1.0, 2.0}) {
      const auto p = ComputeRdpProfile(q, s, DefaultOrders());
      for (int64_t t = 1; t <= 4096; t *= 2) {
        EXPECT_LE(RdpToEpsDelta(p, t, 1e-5).epsilon,
                  RdpToEpsDelta(p, 2 * t, 1e-5).epsilon);
      }
    }
  }
}

TEST(Conversion, FullBatchMatchesAnalyticGaussian) {
  // With q = 1 every order is alpha/(2 s^2); minimize the same expression
  // directly.
  const double s = 1.7, delta = 1e-5;
  const int64_t t = 13;
  double best = INFINITY;
  for (double a : DefaultOrders()) {
    best = std::min(best, t * a / (2 * s * s) + std::log(1 / delta) / (a - 1));
  }
  EXPECT_NEAR(ComputeEpsilon(1.0, s, t, delta).epsilon, best, 1e-9);
}

TEST(Calibrate, GoldenValues) {
  const auto c64 = ComputeNoiseMultiplier(1.0, 1e-4, 64, 2480, 468);
  EXPECT_NEAR(c64.sigma, kGoldenSigmaBatch64, 1e-5);
  const auto c24 = ComputeNoiseMultiplier(1.0, 1e-4, 24, 2480, 1248);
  EXPECT_NEAR(c24.sigma, kGoldenSigmaBatch24, 1e-5);
  EXPECT_NEAR(c24.q, 24.0 / 2480, 1e-15);
}

TEST(Calibrate, RoundTripBracketsTarget) {
  for (double eps : {0.5, 1.0, 3.0, 8.0}) {
    const auto c = ComputeNoiseMultiplier(eps, 1e-5, 32, 3000, 900);
    EXPECT_LE(ComputeEpsilon(c.q, c.sigma, c.steps, c.delta).epsilon, eps);
    EXPECT_GT(ComputeEpsilon(c.q, c.sigma - 1e-3, c.steps, c.delta).epsilon, eps);
    EXPECT_LE(c.epsilon_spent, eps);
  }
}

TEST(Calibrate, MonotoneInEpsilonAndSteps) {
  const double s1 = ComputeNoiseMultiplier(1.0, 1e-4, 64, 2480, 468).sigma;
  const double s8 = ComputeNoiseMultiplier(8.0, 1e-4, 64, 2480, 468).sigma;
  EXPECT_GT(s1, s8);
  const double t2 = ComputeNoiseMultiplier(1.0, 1e-4, 64, 2480, 936).sigma;
  EXPECT_GE(t2, s1);
}

TEST(Calibrate, UnreachableTargetAndBadInputs) {
  EXPECT_THROW(ComputeNoiseMultiplier(1e-9, 1e-9, 2480, 2480, 100000),
               RuntimeFailure);
  EXPECT_THROW(ComputeNoiseMultiplier(-1.0, 1e-4, 64, 2480, 10), ValidationError);
  EXPECT_THROW(ComputeNoiseMultiplier(1.0, 1.5, 64, 2480, 10), ValidationError);
  EXPECT_THROW(ComputeNoiseMultiplier(1.0, 1e-4, 4000, 2480, 10), ValidationError);
}

TEST(Calibrate, JsonRoundTrip) {
  const auto c = ComputeNoiseMultiplier(2.0, 1e-4, 24, 2480, 100);
  const auto back = CalibrationFromJson(ToJson(c));
  EXPECT_EQ(back.sigma, c.sigma);
  EXPECT_EQ(back.minimizing_order, c.minimizing_order);
  EXPECT_EQ(back.steps, c.steps);
}

class StepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = testing::TinyConfig();
    params_ = testing::RandomModel<float>(config_, 3, true, true, true, 0.2);
    Rng rng(4);
    for (int i = 0; i < 6; ++i) {
      batch_.push_back(testing::RandomBlock(config_.context_length,
                                            config_.vocab_size, 6, 1, rng));
    }
  }
  model::ModelConfig config_;
  model::ModelParams<float> params_;
  std::vector<corpus::TokenBlock> batch_;
};

TEST_F(StepTest, NoNoiseHugeClipEqualsMiniBatchSgd) {
  auto dp = params_;
  auto plain = params_;
  const auto sel = model::Selection::Prompts();
  const std::size_t n = model::CountParameters(dp, sel);
  train::Optimizer opt_dp({.kind = train::OptimizerKind::kSgd}, n);
  Rng rng(5);
  DpSgdStep(dp, sel, batch_, {1e6, 0.0, double(batch_.size())}, opt_dp, 0.1, rng);
  const auto ps = model::PerSampleGrads(plain, sel, batch_);
  std::vector<float> theta = model::Gather(plain, sel);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0;
    for (const auto& g : ps.grads) mean += g[i];
    theta[i] -= static_cast<float>(0.1 * mean / batch_.size());
  }
  model::Scatter(plain, sel, theta);
  EXPECT_LT((*dp.prompts - *plain.prompts).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST_F(StepTest, ExpertsAndBackboneUntouched) {
  const auto before_experts =
      model::HashSelection(params_, model::Selection::Experts());
  const auto before_backbone =
      model::HashSelection(params_, model::Selection::Backbone());
  const auto before_prompts = model::HashSelection(params_, model::Selection::Prompts());
  model::Selection shared{.prompts = true, .common = true};
  train::Optimizer opt({}, model::CountParameters(params_, shared));
  Rng rng(6);
  DpSgdStep(params_, shared, batch_, {1.0, 1.0, 6.0}, opt, 1e-2, rng);
  EXPECT_EQ(model::HashSelection(params_, model::Selection::Experts()), before_experts);
  EXPECT_EQ(model::HashSelection(params_, model::Selection::Backbone()), before_backbone);
  EXPECT_NE(model::HashSelection(params_, model::Selection::Prompts()), before_prompts);
}

TEST_F(StepTest, ReplayReproducesTrajectory) {
  auto run = [&](uint64_t seed) {
    auto p = params_;
    const auto sel = model::Selection::Prompts();
    train::Optimizer opt({}, model::CountParameters(p, sel));
    Rng rng(seed);
    for (int step = 0; step < 2; ++step) {
      DpSgdStep(p, sel, batch_, {0.5, 1.2, 6.0}, opt, 1e-2, rng);
    }
    return model::HashSelection(p, sel);
  };
  EXPECT_EQ(run(9), run(9));
  EXPECT_NE(run(9), run(10));
}

}  // namespace
}  // namespace noe::privacy
