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


// DP-SGD primitives: global-norm per-example clipping, Gaussian noise on the
// clipped sum, and the composed update step.

#ifndef NOE_CORE_DP_SGD_HPP_
#define NOE_CORE_DP_SGD_HPP_

#include <span>
#include <vector>

#include "core/common.hpp"
#include "core/optimizer.hpp"
#include "core/transformer.hpp"

namespace noe::privacy {

// Scales each record to norm at most `clip_norm` in place and returns the
// pre-clip norms. Non-finite records are rejected naming the example index.
template <typename T>
std::vector<double> ClipPerSample(std::vector<std::vector<T>>& grads,
                                  double clip_norm);

// (sum of records + N(0, sigma^2 C^2 I)) / denominator, one draw per
// coordinate from `rng` in coordinate order.
template <typename T>
std::vector<T> NoisyAggregate(const std::vector<std::vector<T>>& clipped,
                              double sigma, double clip_norm,
                              double denominator, Rng& rng);

struct StepPrivacy {
  double clip_norm = 1.0;
  double sigma = 0.0;
  // Expected batch size N_b used as the divisor.
  double nominal_batch = 1.0;
};

struct StepStats {
  double mean_loss = 0.0;
  double mean_grad_norm = 0.0;  // pre-clip, averaged over examples
};

// per_sample_grads -> clip -> noisy aggregate -> optimizer update on the
// tensors in `sel`; nothing outside `sel` is written.
StepStats DpSgdStep(model::ModelParams<float>& params,
                    const model::Selection& sel,
                    std::span<const corpus::TokenBlock> batch,
                    const StepPrivacy& privacy, train::Optimizer& optimizer,
                    double lr, Rng& rng, model::GradOptions options = {});

}  // namespace noe::privacy

#endif  // NOE_CORE_DP_SGD_HPP_
