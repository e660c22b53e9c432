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


// Renyi-DP accounting for the Poisson-subsampled Gaussian mechanism and the
// noise-multiplier calibration built on it.

#ifndef NOE_CORE_RDP_HPP_
#define NOE_CORE_RDP_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace noe::privacy {

// {1.5, 1.75, 2, 3, ..., 64, 128, 256}. Versioned with kOrderGridVersion.
inline constexpr int kOrderGridVersion = 1;
const std::vector<double>& DefaultOrders();

// RDP of one invocation at order `alpha` (> 1). q = 0 gives 0 and q = 1 the
// plain Gaussian value alpha / (2 sigma^2).
double RdpSubsampledGaussian(double q, double sigma, double alpha);

struct RdpProfile {
  std::vector<double> orders;
  std::vector<double> eps_per_step;
};

RdpProfile ComputeRdpProfile(double q, double sigma,
                             std::span<const double> orders);

struct EpsilonAtOrder {
  double epsilon = 0.0;
  double order = 0.0;
};

// min over orders of steps * eps_alpha + ln(1/delta) / (alpha - 1).
EpsilonAtOrder RdpToEpsDelta(const RdpProfile& profile, int64_t steps,
                             double delta);

EpsilonAtOrder ComputeEpsilon(double q, double sigma, int64_t steps,
                              double delta);

struct Calibration {
  double epsilon = 0.0;  // target
  double delta = 0.0;
  double q = 0.0;
  int64_t steps = 0;
  double sigma = 0.0;
  double minimizing_order = 0.0;
  // Epsilon actually spent at `sigma` (<= target).
  double epsilon_spent = 0.0;
  int64_t batch_size = 0;
  int64_t dataset_size = 0;
};

nlohmann::json ToJson(const Calibration& c);
Calibration CalibrationFromJson(const nlohmann::json& j);

inline constexpr double kSigmaLow = 1e-2;
inline constexpr double kSigmaHigh = 1e3;
inline constexpr double kSigmaTolerance = 1e-4;

// Smallest sigma in [1e-2, 1e3] (to 1e-4) whose epsilon is <= the target.
// Throws RuntimeFailure when the bracket cannot reach the target.
Calibration ComputeNoiseMultiplier(double epsilon, double delta,
                                   int64_t batch_size, int64_t dataset_size,
                                   int64_t steps);

}  // namespace noe::privacy

#endif  // NOE_CORE_RDP_HPP_
