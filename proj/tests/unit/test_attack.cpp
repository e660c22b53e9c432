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

#include <algorithm>
#include <cmath>
#include <random>

#include "core/attack.hpp"
#include "core/transformer.hpp"
#include "test_support.hpp"

namespace noe::attack {
namespace {

// P(member > nonmember) + P(equal) / 2 by direct enumeration.
double PairwiseAuc(const std::vector<double>& m, const std::vector<double>& n) {
  double wins = 0;
  for (double a : m) {
    for (double b : n) wins += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  }
  return wins / (static_cast<double>(m.size()) * n.size());
}

AttackScores Scores(std::vector<double> m, std::vector<double> n) {
  return {std::move(m), std::move(n), 0, 1, "test"};
}

TEST(Roc, PerfectSeparation) {
  const auto curve = ComputeRoc(Scores({0.9, 0.8}, {0.1, 0.2}));
  EXPECT_DOUBLE_EQ(Auc(curve), 1.0);
  EXPECT_DOUBLE_EQ(TprAtFpr(curve, 0.01), 1.0);
  bool reaches = false;
  for (const auto& p : curve) reaches |= p.fpr == 0.0 && p.tpr == 1.0;
  EXPECT_TRUE(reaches);
}

TEST(Roc, IdenticalDistributionsGiveHalf) {
  EXPECT_DOUBLE_EQ(Auc(ComputeRoc(Scores({0.1, 0.5, 0.7}, {0.7, 0.1, 0.5}))), 0.5);
  EXPECT_DOUBLE_EQ(Auc(ComputeRoc(Scores({2.0, 2.0}, {2.0, 2.0, 2.0}))), 0.5);
}

TEST(Roc, ThreeOfFourPairs) {
  EXPECT_DOUBLE_EQ(Auc(ComputeRoc(Scores({0.9, 0.4}, {0.6, 0.1}))), 0.75);
  EXPECT_DOUBLE_EQ(PairwiseAuc({0.9, 0.4}, {0.6, 0.1}), 0.75);
}

TEST(Roc, CurveIsMonotoneWithEndpoints) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> m(50), nm(70);
  for (auto& v : m) v = std::round(n(rng) * 4) / 4 + 0.3;
  for (auto& v : nm) v = std::round(n(rng) * 4) / 4;
  const auto curve = ComputeRoc(Scores(m, nm));
  EXPECT_EQ(curve.front().fpr, 0.0);
  EXPECT_EQ(curve.front().tpr, 0.0);
  EXPECT_EQ(curve.back().fpr, 1.0);
  EXPECT_EQ(curve.back().tpr, 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].fpr, curve[i - 1].fpr);
    EXPECT_GE(curve[i].tpr, curve[i - 1].tpr);
    EXPECT_LT(curve[i].threshold, curve[i - 1].threshold);
  }
}

TEST(Roc, TrapezoidEqualsPairwiseOracleWithTies) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> size(1, 60);
    // Coarse values so ties are frequent.
    std::uniform_int_distribution<int> value(0, 6 + trial % 20);
    std::vector<double> m(size(rng)), nm(size(rng));
    for (auto& v : m) v = value(rng) * 0.5 + 0.25;
    for (auto& v : nm) v = value(rng) * 0.5;
    EXPECT_NEAR(Auc(ComputeRoc(Scores(m, nm))), PairwiseAuc(m, nm), 1e-12);
  }
}

TEST(Roc, SymmetryAndShiftInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> m(40), nm(30);
  for (auto& v : m) v = n(rng) + 0.5;
  for (auto& v : nm) v = n(rng);
  const auto base = ComputeRoc(Scores(m, nm));
  EXPECT_NEAR(Auc(ComputeRoc(Scores(nm, m))), 1.0 - Auc(base), 1e-12);
  auto shift = [](std::vector<double> v) {
    for (auto& x : v) x += 0.5;  // exactly representable
    return v;
  };
  const auto shifted = ComputeRoc(Scores(shift(m), shift(nm)));
  EXPECT_EQ(Auc(shifted), Auc(base));
  EXPECT_EQ(TprAtFpr(shifted, 0.05), TprAtFpr(base, 0.05));
}

TEST(TprAtFpr, InterpolatesBetweenBracketingPoints) {
  const RocCurve curve{{INFINITY, 0.0, 0.0},
                       {0.9, 0.0, 0.2},
                       {0.5, 0.02, 0.6},
                       {-INFINITY, 1.0, 1.0}};
  EXPECT_DOUBLE_EQ(TprAtFpr(curve, 0.01), 0.4);
  EXPECT_DOUBLE_EQ(TprAtFpr(curve, 0.02), 0.6);
  EXPECT_THROW(TprAtFpr(curve, 0.0), ValidationError);
}

TEST(TprAtFpr, ExactHitUsesThatThreshold) {
  // 100 nonmembers so one false positive is exactly 1%.
  std::vector<double> nm;
  for (int i = 0; i < 100; ++i) nm.push_back(i);
  const auto curve = ComputeRoc(Scores({98.5, 99.5, 200, 10}, nm));
  // FPR = 0.01 at threshold 98 (only 99 exceeds it): members 98.5, 99.5, 200.
  EXPECT_DOUBLE_EQ(TprAtFpr(curve, 0.01), 0.75);
}

TEST(TprAtFpr, NullDistributionNearTarget) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0, 1);
  const int size = 20000;
  std::vector<double> m(size), nm(size);
  for (auto& v : m) v = n(rng);
  for (auto& v : nm) v = n(rng);
  const double tpr = TprAtFpr(ComputeRoc(Scores(m, nm)), 0.01);
  EXPECT_NEAR(tpr, 0.01, 3 * std::sqrt(0.01 * 0.99 / size));
}

TEST(Report, JsonRoundTripIsLossless) {
  const auto r = ReportFromScores(Scores({0.3, 0.7, 0.1}, {0.2, 0.25}), 2);
  const auto back = AttackReportFromJson(nlohmann::json::parse(ToJson(r).dump()));
  EXPECT_EQ(back.auc, r.auc);
  EXPECT_EQ(back.tpr_at_1, r.tpr_at_1);
  EXPECT_EQ(back.skipped, 2);
  ASSERT_EQ(back.curve.size(), r.curve.size());
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    EXPECT_EQ(back.curve[i].threshold, r.curve[i].threshold);
    EXPECT_EQ(back.curve[i].fpr, r.curve[i].fpr);
    EXPECT_EQ(back.curve[i].tpr, r.curve[i].tpr);
  }
  const std::string csv = RocCsv(r.curve);
  EXPECT_EQ(csv.rfind("threshold,fpr,tpr\ninf,0,0\n", 0), 0u);
}

TEST(Report, EmptyOrNonFiniteScoresRejected) {
  EXPECT_THROW(ComputeRoc(Scores({}, {0.1})), ValidationError);
  EXPECT_THROW(ComputeRoc(Scores({NAN}, {0.1})), ValidationError);
}

class ScoringTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = testing::TinyConfig();
    params_ = testing::RandomModel<float>(config_, 8);
    for (int i = 0; i < 3; ++i) {
      corpus::Document d{i, 0, corpus::Split::kTrain, {}};
      for (int t = 0; t < 4 + 2 * i; ++t) d.tokens.push_back((3 * t + i) % 11);
      docs_.push_back(d);
    }
  }
  std::vector<const corpus::Document*> Pointers() {
    std::vector<const corpus::Document*> out;
    for (const auto& d : docs_) out.push_back(&d);
    return out;
  }
  model::ModelConfig config_;
  model::ModelParams<float> params_;
  std::vector<corpus::Document> docs_;
};

TEST_F(ScoringTest, MatchesPerDocumentAccumulation) {
  const auto r = ScoreDocuments(params_, 1, Pointers(), config_.context_length);
  ASSERT_EQ(r.scores.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const auto& t = docs_[i].tokens;
    const std::size_t n = std::min<std::size_t>(t.size(), config_.context_length);
    const auto logits = model::Forward(
        params_, 1, corpus::MakeBlock(t, config_.context_length, 1, 0));
    double sum = 0;
    for (std::size_t l = 1; l < n; ++l) {
      double z = 0;
      for (int v = 0; v < config_.vocab_size; ++v) z += std::exp(double(logits(l - 1, v)));
      sum += double(logits(l - 1, t[l])) - std::log(z);
    }
    EXPECT_NEAR(r.scores[i], sum / (n - 1), 1e-5);
  }
}

TEST_F(ScoringTest, OrderIndependentAndSkipsShortDocuments) {
  auto ptrs = Pointers();
  auto a = ScoreDocuments(params_, 0, ptrs, config_.context_length).scores;
  std::reverse(ptrs.begin(), ptrs.end());
  auto b = ScoreDocuments(params_, 0, ptrs, config_.context_length).scores;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  corpus::Document one{9, 0, corpus::Split::kTrain, {4}};
  ptrs.push_back(&one);
  const auto r = ScoreDocuments(params_, 0, ptrs, config_.context_length);
  EXPECT_EQ(r.skipped, 1);
  EXPECT_EQ(r.scores.size(), 3u);
}

TEST_F(ScoringTest, UniformModelScoresMinusLogV) {
  params_.backbone.w_out.setZero();
  for (double s : ScoreDocuments(params_, 0, Pointers(), config_.context_length).scores) {
    EXPECT_NEAR(s, -std::log(11.0), 1e-6);
  }
}

TEST(CrossDomain, SameDomainRejected) {
  const auto c = testing::TinyConfig();
  const auto p = testing::RandomModel<float>(c, 9);
  const corpus::Corpus corpus(3, c.vocab_size,
                              {{0, 0, corpus::Split::kTrain, {1, 2, 3}},
                               {1, 0, corpus::Split::kTest, {1, 2, 3}}});
  EXPECT_THROW(CrossDomainAttack(p, 1, 1, corpus, c.context_length), ValidationError);
  EXPECT_THROW(CrossDomainAttack(p, 3, 1, corpus, c.context_length), ValidationError);
}

}  // namespace
}  // namespace noe::attack
