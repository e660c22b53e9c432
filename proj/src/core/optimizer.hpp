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


#ifndef NOE_CORE_OPTIMIZER_HPP_
#define NOE_CORE_OPTIMIZER_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace noe::train {

enum class OptimizerKind { kAdamW, kSgd };

OptimizerKind ParseOptimizerKind(const std::string& name);
std::string ToString(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Updates a flat float parameter vector in place.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t size);

  void Step(std::vector<float>& theta, const std::vector<float>& grad,
            double lr);
  int64_t steps() const { return t_; }

 private:
  OptimizerConfig config_;
  std::vector<double> m_, v_;
  int64_t t_ = 0;
};

// Linear warmup from 0 over `warmup` steps, then linear decay to 0 at
// `total`. `step` is 0-based.
double LearningRate(double eta, int64_t step, int64_t warmup, int64_t total);

}  // namespace noe::train

#endif  // NOE_CORE_OPTIMIZER_HPP_
