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
#include <vector>

#include "core/transformer.hpp"
#include "test_support.hpp"

namespace noe::model {
namespace {

using corpus::TokenBlock;
using testing::RandomBlock;
using testing::RandomModel;
using testing::TinyConfig;

// Straight-line reference forward in double using plain loops.
std::vector<std::vector<double>> ReferenceForward(const ModelParams<double>& p,
                                                  int domain,
                                                  const TokenBlock& block) {
  const ModelConfig& c = p.config;
  const int np = p.prompts ? c.n_pt : 0;
  const int n = np + c.context_length;
  const int d = c.d_model;
  using Rows = std::vector<std::vector<double>>;
  Rows x(n, std::vector<double>(d));
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < d; ++j) {
      const double e = s < np ? (*p.prompts)(s, j)
                              : p.backbone.tok_emb(block.tokens[s - np], j);
      const int pos = s < np ? s : c.n_pt + (s - np);
      x[s][j] = e + p.backbone.pos_emb(pos, j);
    }
  }
  auto layer_norm = [&](const Rows& in, const Matrix<double>& g,
                        const Matrix<double>& b) {
    Rows out = in;
    for (auto& row : out) {
      double mean = 0, var = 0;
      for (double v : row) mean += v;
      mean /= row.size();
      for (double v : row) var += (v - mean) * (v - mean);
      var /= row.size();
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = (row[j] - mean) / std::sqrt(var + 1e-5) * g(0, j) + b(0, j);
      }
    }
    return out;
  };
  auto matmul = [](const Rows& a, const std::vector<std::vector<double>>& w) {
    Rows out(a.size(), std::vector<double>(w[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t k = 0; k < w.size(); ++k)
        for (std::size_t j = 0; j < w[0].size(); ++j)
          out[i][j] += a[i][k] * w[k][j];
    return out;
  };
  auto dense = [](const Matrix<double>& m) {
    Rows out(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
    return out;
  };
  auto add_lora = [&](Rows& w, const LoraPair<double>& pair) {
    for (std::size_t i = 0; i < w.size(); ++i)
      for (std::size_t j = 0; j < w[0].size(); ++j)
        for (int r = 0; r < pair.b.cols(); ++r)
          w[i][j] += c.alpha * pair.b(i, r) * pair.a(r, j);
  };
  for (std::size_t l = 0; l < p.backbone.layers.size(); ++l) {
    const auto& w = p.backbone.layers[l];
    Rows h = layer_norm(x, w.ln1_g, w.ln1_b);
    Rows q = matmul(h, dense(w.wq)), k = matmul(h, dense(w.wk)),
         v = matmul(h, dense(w.wv));
    Rows ctx(n, std::vector<double>(d, 0.0));
    const int dh = d / c.n_heads;
    for (int hd = 0; hd < c.n_heads; ++hd) {
      for (int i = 0; i < n; ++i) {
        std::vector<double> s(i + 1);
        double mx = -1e300;
        for (int j = 0; j <= i; ++j) {
          double dot = 0;
          for (int t = 0; t < dh; ++t) dot += q[i][hd * dh + t] * k[j][hd * dh + t];
          s[j] = dot / std::sqrt(double(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (int j = 0; j <= i; ++j)
          for (int t = 0; t < dh; ++t)
            ctx[i][hd * dh + t] += s[j] / z * v[j][hd * dh + t];
      }
    }
    Rows o = matmul(ctx, dense(w.wproj));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x[i][j] += o[i][j];
    Rows u = layer_norm(x, w.ln2_g, w.ln2_b);
    Rows wi = dense(w.wi), wo = dense(w.wo);
    if (!p.experts.empty()) {
      add_lora(wi, p.experts[domain][l].wi);
      add_lora(wo, p.experts[domain][l].wo);
    }
    if (p.common) {
      add_lora(wi, (*p.common)[l].wi);
      add_lora(wo, (*p.common)[l].wo);
    }
    Rows a = matmul(u, wi);
    for (auto& row : a)
      for (double& val : row)
        val = 0.5 * val *
              (1 + std::tanh(std::sqrt(2 / M_PI) * (val + 0.044715 * val * val * val)));
    Rows f = matmul(a, wo);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) x[i][j] += f[i][j];
  }
  Rows hf = layer_norm(x, p.backbone.lnf_g, p.backbone.lnf_b);
  Rows logits = matmul(hf, dense(p.backbone.w_out));
  return Rows(logits.begin() + np, logits.end());
}

TEST(EffectiveWeight, ZeroAdapterReturnsBase) {
  Rng rng(3);
  Matrix<float> w(4, 6);
  testing::Randomize(w, rng, 1.0);
  LoraPair<float> pair{Matrix<float>::Zero(2, 6), Matrix<float>::Ones(4, 2)};
  EXPECT_EQ(EffectiveWeight(w, &pair, nullptr, 0.5), w);
}

TEST(EffectiveWeight, RankOneUnitOuterProduct) {
  Matrix<double> w = Matrix<double>::Zero(3, 4);
  LoraPair<double> pair{Matrix<double>::Zero(1, 4), Matrix<double>::Zero(3, 1)};
  pair.a(0, 0) = 1;
  pair.b(0, 0) = 1;
  Matrix<double> expected = Matrix<double>::Zero(3, 4);
  expected(0, 0) = 1;
  EXPECT_EQ(EffectiveWeight(w, &pair, nullptr, 1.0), expected);
}

TEST(EffectiveWeight, MatchesTripleLoop) {
  Rng rng(4);
  Matrix<double> w(8, 16);
  LoraPair<double> pair{Matrix<double>(2, 16), Matrix<double>(8, 2)};
  testing::Randomize(w, rng, 1.0);
  testing::Randomize(pair.a, rng, 1.0);
  testing::Randomize(pair.b, rng, 1.0);
  const Matrix<double> got = EffectiveWeight(w, &pair, nullptr, 0.5);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 16; ++j) {
      double acc = 0;
      for (int r = 0; r < 2; ++r) acc += pair.b(i, r) * pair.a(r, j);
      EXPECT_NEAR(got(i, j), w(i, j) + 0.5 * acc, 1e-12);
    }
  }
}

TEST(EffectiveWeight, ShapeMismatchRejected) {
  Matrix<float> w = Matrix<float>::Zero(4, 6);
  LoraPair<float> pair{Matrix<float>::Zero(2, 5), Matrix<float>::Zero(4, 2)};
  EXPECT_THROW(EffectiveWeight(w, &pair, nullptr, 1.0), ValidationError);
}

TEST(Forward, MatchesReferenceImplementation) {
  ModelConfig c = TinyConfig();
  const auto pd = RandomModel<double>(c, 11);
  const auto pf = CastParams<float>(pd);
  Rng rng(12);
  for (int trial = 0; trial < 6; ++trial) {
    const int domain = trial % c.num_domains;
    const TokenBlock b = RandomBlock(c.context_length, c.vocab_size,
                                     2 + trial % 5, domain, rng);
    const auto ref = ReferenceForward(pd, domain, b);
    const Matrix<double> got_d = Forward(pd, domain, b);
    const Matrix<float> got_f = Forward(pf, domain, b);
    for (int i = 0; i < c.context_length; ++i) {
      for (int v = 0; v < c.vocab_size; ++v) {
        EXPECT_NEAR(got_d(i, v), ref[i][v], 1e-12);
        EXPECT_NEAR(got_f(i, v), ref[i][v], 1e-6);
      }
    }
  }
}

TEST(Forward, MatchesReferenceWithoutPrompts) {
  ModelConfig c = TinyConfig();
  c.n_pt = 0;
  const auto p = RandomModel<double>(c, 13, false, true, false);
  Rng rng(14);
  const TokenBlock b = RandomBlock(c.context_length, c.vocab_size, 6, 1, rng);
  const auto ref = ReferenceForward(p, 1, b);
  const Matrix<double> got = Forward(p, 1, b);
  for (int i = 0; i < c.context_length; ++i)
    for (int v = 0; v < c.vocab_size; ++v) EXPECT_NEAR(got(i, v), ref[i][v], 1e-12);
}

TEST(Forward, ZeroAdaptersAreExactlyNeutral) {
  ModelConfig c = TinyConfig();
  auto p = RandomModel<float>(c, 15, true, false, false);
  Rng rng(16);
  const TokenBlock b = RandomBlock(c.context_length, c.vocab_size, 6, 2, rng);
  const Matrix<float> base = Forward(p, 2, b);
  for (int k = 0; k < c.num_domains; ++k) {
    p.experts.push_back(InitAdapters<float>(c, c.rank, rng));
  }
  p.common = InitAdapters<float>(c, c.common_rank, rng);
  EXPECT_EQ(Forward(p, 2, b), base);
}

TEST(Forward, RejectsBadInput) {
  ModelConfig c = TinyConfig();
  const auto p = RandomModel<float>(c, 17);
  Rng rng(18);
  TokenBlock b = RandomBlock(c.context_length, c.vocab_size, 6, 0, rng);
  EXPECT_THROW(Forward(p, 3, b), ValidationError);
  EXPECT_THROW(Forward(p, -1, b), ValidationError);
  b.tokens[0] = c.vocab_size;
  EXPECT_THROW(Forward(p, 0, b), ValidationError);
  TokenBlock short_block = RandomBlock(c.context_length - 1, c.vocab_size, 3, 0, rng);
  EXPECT_THROW(Forward(p, 0, short_block), ValidationError);
}

TEST(Loss, UniformLogitsGiveLogV) {
  Rng rng(20);
  for (int real : {2, 4, 6}) {
    const TokenBlock b = RandomBlock(6, 11, real, 0, rng);
    EXPECT_NEAR(Loss<double>(Matrix<double>::Constant(6, 11, 0.3), b),
                std::log(11.0), 1e-12);
  }
}

TEST(Loss, ConfidentCorrectLogitsGiveNearZero) {
  Rng rng(21);
  const TokenBlock b = RandomBlock(6, 11, 6, 0, rng);
  Matrix<double> logits = Matrix<double>::Zero(6, 11);
  for (int i = 0; i + 1 < 6; ++i) logits(i, b.tokens[i + 1]) = 30.0;
  EXPECT_LE(Loss(logits, b), 1e-6);
}

TEST(Loss, MatchesSoftmaxCrossEntropyOracle) {
  Rng rng(22);
  const TokenBlock b = RandomBlock(4, 7, 4, 0, rng);
  Matrix<double> logits(4, 7);
  testing::Randomize(logits, rng, 2.0);
  double total = 0;
  for (int i = 0; i < 3; ++i) {
    double z = 0;
    for (int v = 0; v < 7; ++v) z += std::exp(logits(i, v));
    total += -std::log(std::exp(logits(i, b.tokens[i + 1])) / z);
  }
  EXPECT_NEAR(Loss(logits, b), total / 3, 1e-8);
}

TEST(Loss, PaddedTargetsExcluded) {
  Rng rng(23);
  const TokenBlock b = RandomBlock(6, 7, 3, 0, rng);
  Matrix<double> logits(6, 7);
  testing::Randomize(logits, rng, 2.0);
  Matrix<double> head = logits.topRows(3);
  const TokenBlock b3 = corpus::MakeBlock(
      std::vector<corpus::TokenId>(b.tokens.begin(), b.tokens.begin() + 3), 3, 0, 0);
  EXPECT_NEAR(Loss(logits, b), Loss(head, b3), 1e-12);
}

TEST(Loss, SingleRealTokenIsAnError) {
  Rng rng(24);
  const TokenBlock b = RandomBlock(6, 7, 1, 0, rng);
  EXPECT_THROW(Loss<double>(Matrix<double>::Zero(6, 7), b), ValidationError);
}

// Central differences over every parameter of a tiny model.
TEST(Gradients, MatchFiniteDifferences) {
  const ModelConfig c = TinyConfig();
  auto p = RandomModel<double>(c, 31);
  const Selection all = PresentSelection(p);
  const std::size_t n = CountParameters(p, all);
  ASSERT_LE(n, 5000u);
  Rng rng(32);
  std::vector<TokenBlock> batch;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(RandomBlock(c.context_length, c.vocab_size, 3 + i % 4,
                                i % c.num_domains, rng));
  }
  const auto grads = PerSampleGrads(p, all, batch, {.allow_backbone = true});
  const std::vector<double> theta = Gather(p, all);
  const double h = 1e-4;
  double worst = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> t = theta;
      t[i] = theta[i] + h;
      Scatter(p, all, t);
      const double up = Loss(Forward(p, batch[e].domain, batch[e]), batch[e]);
      t[i] = theta[i] - h;
      Scatter(p, all, t);
      const double down = Loss(Forward(p, batch[e].domain, batch[e]), batch[e]);
      const double numeric = (up - down) / (2 * h);
      const double analytic = grads.grads[e][i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  Scatter(p, all, theta);
  EXPECT_LT(worst, 1e-4);
}

TEST(Gradients, BatchOfOneEqualsDirectGradient) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<double>(c, 33);
  Rng rng(34);
  const TokenBlock b = RandomBlock(c.context_length, c.vocab_size, 5, 1, rng);
  const Selection sel = Selection::Prompts();
  const GradLayout layout(p, sel);
  std::vector<double> direct(layout.size());
  const double loss = LossAndGradient(p, layout, b, std::span<double>(direct));
  const auto ps = PerSampleGrads(p, sel, std::span<const TokenBlock>(&b, 1));
  EXPECT_EQ(ps.grads[0], direct);
  EXPECT_EQ(ps.losses[0], loss);
}

TEST(Gradients, DuplicatedExamplesGiveIdenticalRecords) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<float>(c, 35);
  Rng rng(36);
  const TokenBlock b = RandomBlock(c.context_length, c.vocab_size, 6, 0, rng);
  const std::vector<TokenBlock> batch{b, b};
  const auto ps = PerSampleGrads(p, Selection::Experts(), batch);
  EXPECT_EQ(ps.grads[0], ps.grads[1]);
}

TEST(Gradients, BitwiseIndependentOfBufferAlignment) {
  const ModelConfig c = TinyConfig();
  auto p = RandomModel<float>(c, 37);
  p.backbone.pos_emb.setRandom();
  Rng rng(38);
  const TokenBlock b = RandomBlock(c.context_length, c.vocab_size, 7, 0, rng);
  const Selection sel = FullSelection(true, true, false);
  const GradLayout layout(p, sel);
  std::vector<float> storage(layout.size() + 16);
  std::vector<float> ref;
  for (int shift = 0; shift < 16; ++shift) {
    std::span<float> g(storage.data() + shift, layout.size());
    LossAndGradient(p, layout, b, g);
    std::vector<float> got(g.begin(), g.end());
    if (shift == 0) {
      ref = got;
    } else {
      EXPECT_EQ(got, ref) << "shift " << shift;
    }
  }
}

TEST(Gradients, CrossDomainExpertGradientsAreExactlyZero) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<float>(c, 37);
  Rng rng(38);
  for (int j = 0; j < c.num_domains; ++j) {
    std::vector<TokenBlock> batch;
    for (int i = 0; i < 4; ++i) {
      batch.push_back(RandomBlock(c.context_length, c.vocab_size, 6, j, rng));
    }
    const auto ps = PerSampleGrads(p, Selection::Experts(), batch);
    const GradLayout layout(p, Selection::Experts());
    for (int k = 0; k < c.num_domains; ++k) {
      ModelParams<float> probe = p;
      const GradLayout only_k(p, Selection::Experts(k));
      const std::ptrdiff_t start = layout.Offset("expert/" + std::to_string(k) + "/0/Wi/A");
      ASSERT_GE(start, 0);
      for (const auto& g : ps.grads) {
        double norm = 0;
        for (std::size_t i = 0; i < only_k.size(); ++i) norm += std::abs(g[start + i]);
        if (k == j) {
          EXPECT_GT(norm, 0.0);
        } else {
          EXPECT_EQ(norm, 0.0);
        }
      }
    }
  }
}

TEST(Gradients, BackboneRequestRejectedByDefault) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<float>(c, 39);
  Rng rng(40);
  const std::vector<TokenBlock> batch{
      RandomBlock(c.context_length, c.vocab_size, 6, 0, rng)};
  EXPECT_THROW(PerSampleGrads(p, Selection::Backbone(), batch), ValidationError);
  EXPECT_THROW(PerSampleGrads(p, Selection{}, batch), ValidationError);
}

TEST(Merge, ZeroAdaptersKeepBackboneBitwise) {
  ModelConfig c = TinyConfig();
  auto p = RandomModel<float>(c, 41, true, false, false);
  Rng rng(42);
  for (int k = 0; k < c.num_domains; ++k) {
    p.experts.push_back(InitAdapters<float>(c, c.rank, rng));
  }
  const auto merged = MergeForDeployment(p, 1);
  for (std::size_t l = 0; l < p.backbone.layers.size(); ++l) {
    EXPECT_EQ(merged.backbone.layers[l].wi, p.backbone.layers[l].wi);
    EXPECT_EQ(merged.backbone.layers[l].wo, p.backbone.layers[l].wo);
  }
  EXPECT_TRUE(merged.experts.empty());
  EXPECT_FALSE(merged.common.has_value());
}

TEST(Merge, MergedLogitsMatchRoutedLogits) {
  ModelConfig c;  // desk-scale default
  const auto p = RandomModel<float>(c, 43, true, true, true, 0.05);
  Rng rng(44);
  for (int k = 0; k < c.num_domains; ++k) {
    const auto merged = MergeForDeployment(p, k);
    float worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const TokenBlock b = RandomBlock(c.context_length, c.vocab_size,
                                       2 + trial % (c.context_length - 1), k, rng);
      worst = std::max(worst, (Forward(merged, k, b) - Forward(p, k, b))
                                  .cwiseAbs()
                                  .maxCoeff());
    }
    EXPECT_LT(worst, 1e-5f) << "domain " << k;
  }
}

TEST(Merge, OtherDomainsDoNotLeakIntoDeployment) {
  const ModelConfig c = TinyConfig();
  auto p = RandomModel<float>(c, 45);
  const auto before = MergeForDeployment(p, 0);
  Rng rng(46);
  for (int k = 1; k < c.num_domains; ++k) {
    for (auto& la : p.experts[k]) {
      testing::Randomize(la.wi.a, rng, 1.0);
      testing::Randomize(la.wo.b, rng, 1.0);
    }
  }
  const auto after = MergeForDeployment(p, 0);
  EXPECT_EQ(HashSelection(before, PresentSelection(before)),
            HashSelection(after, PresentSelection(after)));
  EXPECT_THROW(MergeForDeployment(p, 3), ValidationError);
}

TEST(SequenceLogLikelihood, UniformModelGivesMinusLogV) {
  ModelConfig c;
  auto p = RandomModel<float>(c, 47, true, false, false, 0.02);
  p.backbone.w_out.setZero();
  const std::vector<corpus::TokenId> tokens{5, 9, 17, 33, 2, 1, 0, 127};
  EXPECT_NEAR(SequenceLogLikelihood(p, 0, tokens), -std::log(128.0), 1e-6);
}

TEST(SequenceLogLikelihood, TwoTokensIsSingleConditional) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<double>(c, 48);
  const std::vector<corpus::TokenId> tokens{3, 7};
  const Matrix<double> logits =
      Forward(p, 1, corpus::MakeBlock(tokens, c.context_length, 1, 0));
  const double lse = std::log(logits.row(0).array().exp().sum());
  EXPECT_NEAR(SequenceLogLikelihood(p, 1, tokens), logits(0, 7) - lse, 1e-12);
}

TEST(SequenceLogLikelihood, MatchesPrefixByPrefixAccumulation) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<double>(c, 49);
  const std::vector<corpus::TokenId> tokens{1, 4, 4, 9, 0, 10};
  double sum = 0;
  for (std::size_t l = 1; l < tokens.size(); ++l) {
    // Feed only the prefix, so causality is exercised as well.
    const std::vector<corpus::TokenId> prefix(tokens.begin(), tokens.begin() + l);
    const Matrix<double> logits =
        Forward(p, 2, corpus::MakeBlock(prefix, c.context_length, 2, 0));
    double z = 0;
    for (int v = 0; v < c.vocab_size; ++v) z += std::exp(logits(l - 1, v));
    sum += std::log(std::exp(logits(l - 1, tokens[l])) / z);
  }
  EXPECT_NEAR(SequenceLogLikelihood(p, 2, tokens), sum / 5, 1e-8);
}

TEST(SequenceLogLikelihood, RejectsSingleToken) {
  const ModelConfig c = TinyConfig();
  const auto p = RandomModel<double>(c, 50);
  const std::vector<corpus::TokenId> one{3};
  EXPECT_THROW(SequenceLogLikelihood(p, 0, one), ValidationError);
}

TEST(Params, PromptCountIsNptTimesDmodel) {
  ModelConfig c;
  const auto p = RandomModel<float>(c, 51);
  EXPECT_EQ(CountParameters(p, Selection::Prompts()),
            static_cast<std::size_t>(c.n_pt * c.d_model));
}

TEST(Params, FreshAdaptersHaveZeroProduct) {
  ModelConfig c;
  Rng rng(52);
  for (const auto& la : InitAdapters<float>(c, c.rank, rng)) {
    EXPECT_EQ((la.wi.b * la.wi.a).cwiseAbs().maxCoeff(), 0.0f);
    EXPECT_EQ((la.wo.b * la.wo.a).cwiseAbs().maxCoeff(), 0.0f);
    EXPECT_GT(la.wi.a.cwiseAbs().maxCoeff(), 0.0f);
  }
}

TEST(Params, GatherScatterRoundTrip) {
  const ModelConfig c = TinyConfig();
  auto p = RandomModel<float>(c, 53);
  const Selection all = PresentSelection(p);
  const std::string hash = HashSelection(p, all);
  const auto flat = Gather(p, all);
  auto q = RandomModel<float>(c, 54);
  Scatter(q, all, flat);
  EXPECT_EQ(HashSelection(q, all), hash);
}

}  // namespace
}  // namespace noe::model
