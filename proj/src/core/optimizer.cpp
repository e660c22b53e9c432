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


#include "core/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "core/common.hpp"

namespace noe::train {

OptimizerKind ParseOptimizerKind(const std::string& name) {
  if (name == "adamw" || name == "adaptive_moment") return OptimizerKind::kAdamW;
  if (name == "sgd" || name == "plain_sgd") return OptimizerKind::kSgd;
  Fail("unknown optimizer \"" + name + "\" (expected adamw or sgd)");
}

std::string ToString(OptimizerKind kind) {
  return kind == OptimizerKind::kAdamW ? "adamw" : "sgd";
}

Optimizer::Optimizer(const OptimizerConfig& config, std::size_t size)
    : config_(config) {
  if (config_.kind == OptimizerKind::kAdamW) {
    m_.assign(size, 0.0);
    v_.assign(size, 0.0);
  }
}

void Optimizer::Step(std::vector<float>& theta, const std::vector<float>& grad,
                     double lr) {
  Require(theta.size() == grad.size(), "optimizer: gradient size mismatch");
  ++t_;
  if (config_.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] = static_cast<float>(theta[i] - lr * grad[i]);
    }
    return;
  }
  Require(m_.size() == theta.size(), "optimizer: state size mismatch");
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1 * m_[i] + (1 - b1) * g;
    v_[i] = b2 * v_[i] + (1 - b2) * g * g;
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    double p = theta[i];
    p -= lr * config_.weight_decay * p;
    p -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    theta[i] = static_cast<float>(p);
  }
}

double LearningRate(double eta, int64_t step, int64_t warmup, int64_t total) {
  if (step < warmup) {
    return eta * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (total <= warmup) return eta;
  return eta * std::max(0.0, static_cast<double>(total - step) /
                                 static_cast<double>(total - warmup));
}

}  // namespace noe::train
