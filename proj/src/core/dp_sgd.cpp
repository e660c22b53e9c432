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


#include "core/dp_sgd.hpp"

#include <cmath>
#include <string>

namespace noe::privacy {

template <typename T>
std::vector<double> ClipPerSample(std::vector<std::vector<T>>& grads,
                                  double clip_norm) {
  Require(clip_norm > 0.0, "clip_per_sample: clip norm C must be > 0");
  std::vector<double> norms;
  norms.reserve(grads.size());
  for (std::size_t e = 0; e < grads.size(); ++e) {
    double sq = 0.0;
    for (T v : grads[e]) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw RuntimeFailure("clip_per_sample: non-finite gradient in example " +
                             std::to_string(e));
      }
      sq += static_cast<double>(v) * static_cast<double>(v);
    }
    const double norm = std::sqrt(sq);
    norms.push_back(norm);
    if (norm > clip_norm) {
      const double scale = clip_norm / norm;
      for (T& v : grads[e]) v = static_cast<T>(v * scale);
    }
  }
  return norms;
}

template <typename T>
std::vector<T> NoisyAggregate(const std::vector<std::vector<T>>& clipped,
                              double sigma, double clip_norm,
                              double denominator, Rng& rng) {
  Require(sigma >= 0.0, "noisy_aggregate: sigma must be >= 0");
  Require(denominator > 0.0, "noisy_aggregate: batch divisor must be > 0");
  Require(!clipped.empty(), "noisy_aggregate: empty batch");
  const std::size_t n = clipped[0].size();
  std::vector<double> sum(n, 0.0);
  for (const auto& g : clipped) {
    Require(g.size() == n, "noisy_aggregate: ragged gradient records");
    for (std::size_t i = 0; i < n; ++i) sum[i] += g[i];
  }
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma * clip_norm);
    for (std::size_t i = 0; i < n; ++i) sum[i] += noise(rng);
  }
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<T>(sum[i] / denominator);
  }
  return out;
}

StepStats DpSgdStep(model::ModelParams<float>& params,
                    const model::Selection& sel,
                    std::span<const corpus::TokenBlock> batch,
                    const StepPrivacy& privacy, train::Optimizer& optimizer,
                    double lr, Rng& rng, model::GradOptions options) {
  Require(!batch.empty(), "dp_sgd_step: empty batch");
  auto ps = model::PerSampleGrads(params, sel, batch, options);
  StepStats stats;
  for (float l : ps.losses) stats.mean_loss += l;
  stats.mean_loss /= static_cast<double>(batch.size());
  const std::vector<double> norms = ClipPerSample(ps.grads, privacy.clip_norm);
  for (double n : norms) stats.mean_grad_norm += n;
  stats.mean_grad_norm /= static_cast<double>(batch.size());
  const std::vector<float> g = NoisyAggregate(
      ps.grads, privacy.sigma, privacy.clip_norm, privacy.nominal_batch, rng);
  std::vector<float> theta = model::Gather(params, sel);
  optimizer.Step(theta, g, lr);
  model::Scatter(params, sel, theta);
  return stats;
}

template std::vector<double> ClipPerSample<float>(std::vector<std::vector<float>>&, double);
template std::vector<double> ClipPerSample<double>(std::vector<std::vector<double>>&, double);
template std::vector<float> NoisyAggregate<float>(const std::vector<std::vector<float>>&,
                                                  double, double, double, Rng&);
template std::vector<double> NoisyAggregate<double>(const std::vector<std::vector<double>>&,
                                                    double, double, double, Rng&);

}  // namespace noe::privacy
