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


#include "core/rdp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "core/common.hpp"

namespace noe::privacy {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log(exp(a) - exp(b)) for a >= b.
double LogSub(double a, double b) {
  if (b == kNegInf) return a;
  if (a <= b) return kNegInf;
  return b + std::log(std::expm1(a - b));
}

// log(erfc(x)), finite for large x.
double LogErfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  // Asymptotic expansion; the truncation error is far below double epsilon
  // at this range.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / (2 * x2) + 3.0 / (4 * x2 * x2) -
                        15.0 / (8 * x2 * x2 * x2) +
                        105.0 / (16 * x2 * x2 * x2 * x2);
  return -x2 - std::log(x) - 0.5 * std::log(M_PI) + std::log(series);
}

// Integer order: binomial expansion of E[(1 - q + q e^{...})^alpha].
double LogAInt(double q, double sigma, int alpha) {
  double log_a = kNegInf;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int i = 0; i <= alpha; ++i) {
    const double log_binom = std::lgamma(alpha + 1.0) - std::lgamma(i + 1.0) -
                             std::lgamma(alpha - i + 1.0);
    const double s = log_binom + i * log_q + (alpha - i) * log_1mq +
                     (static_cast<double>(i) * i - i) / (2 * sigma * sigma);
    log_a = LogAdd(log_a, s);
  }
  return log_a;
}

// Fractional order: split the integral at z0 and sum the two convergent
// series of generalized binomial terms.
double LogAFrac(double q, double sigma, double alpha) {
  double log_a0 = kNegInf;
  double log_a1 = kNegInf;
  const double z0 = sigma * sigma * std::log(1.0 / q - 1.0) + 0.5;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  // Generalized binomial coefficient C(alpha, i), tracked as sign and log
  // magnitude.
  double log_coef = 0.0;
  bool positive = true;
  for (int i = 0;; ++i) {
    if (i > 0) {
      const double factor = (alpha - i + 1) / i;
      if (factor == 0.0) break;
      if (factor < 0) positive = !positive;
      log_coef += std::log(std::abs(factor));
    }
    const double j = alpha - i;
    const double log_t0 = log_coef + i * log_q + j * log_1mq;
    const double log_t1 = log_coef + j * log_q + i * log_1mq;
    const double log_e0 =
        std::log(0.5) + LogErfc((i - z0) / (std::sqrt(2.0) * sigma));
    const double log_e1 =
        std::log(0.5) + LogErfc((z0 - j) / (std::sqrt(2.0) * sigma));
    const double log_s0 =
        log_t0 + (static_cast<double>(i) * i - i) / (2 * sigma * sigma) + log_e0;
    const double log_s1 = log_t1 + (j * j - j) / (2 * sigma * sigma) + log_e1;
    if (positive) {
      log_a0 = LogAdd(log_a0, log_s0);
      log_a1 = LogAdd(log_a1, log_s1);
    } else {
      log_a0 = LogSub(log_a0, log_s0);
      log_a1 = LogSub(log_a1, log_s1);
    }
    if (std::max(log_s0, log_s1) < -30) break;
    if (i > 100000) throw RuntimeFailure("rdp: fractional series diverged");
  }
  return LogAdd(log_a0, log_a1);
}

}  // namespace

const std::vector<double>& DefaultOrders() {
  static const std::vector<double> orders = [] {
    std::vector<double> o{1.5, 1.75};
    for (int a = 2; a <= 64; ++a) o.push_back(a);
    o.push_back(128);
    o.push_back(256);
    return o;
  }();
  return orders;
}

double RdpSubsampledGaussian(double q, double sigma, double alpha) {
  Require(alpha > 1.0, "rdp: order alpha must be > 1");
  Require(q >= 0.0 && q <= 1.0, "rdp: sampling rate q must lie in [0, 1]");
  Require(sigma >= 0.0, "rdp: sigma must be >= 0");
  if (q == 0.0) return 0.0;
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  if (q == 1.0) return alpha / (2 * sigma * sigma);
  const double log_a = alpha == std::floor(alpha)
                           ? LogAInt(q, sigma, static_cast<int>(alpha))
                           : LogAFrac(q, sigma, alpha);
  return log_a / (alpha - 1.0);
}

RdpProfile ComputeRdpProfile(double q, double sigma,
                             std::span<const double> orders) {
  RdpProfile p;
  p.orders.assign(orders.begin(), orders.end());
  for (double a : orders) p.eps_per_step.push_back(RdpSubsampledGaussian(q, sigma, a));
  return p;
}

EpsilonAtOrder RdpToEpsDelta(const RdpProfile& profile, int64_t steps,
                             double delta) {
  Require(!profile.orders.empty(), "rdp_to_eps_delta: empty order list");
  Require(profile.orders.size() == profile.eps_per_step.size(),
          "rdp_to_eps_delta: orders and values differ in length");
  Require(delta > 0.0 && delta < 1.0, "rdp_to_eps_delta: delta must lie in (0, 1)");
  Require(steps >= 1, "rdp_to_eps_delta: steps must be >= 1");
  EpsilonAtOrder best{std::numeric_limits<double>::infinity(), profile.orders[0]};
  for (std::size_t i = 0; i < profile.orders.size(); ++i) {
    const double a = profile.orders[i];
    Require(a > 1.0, "rdp_to_eps_delta: orders must be > 1");
    const double eps = static_cast<double>(steps) * profile.eps_per_step[i] +
                       std::log(1.0 / delta) / (a - 1.0);
    if (eps < best.epsilon) best = {eps, a};
  }
  return best;
}

EpsilonAtOrder ComputeEpsilon(double q, double sigma, int64_t steps,
                              double delta) {
  return RdpToEpsDelta(ComputeRdpProfile(q, sigma, DefaultOrders()), steps,
                       delta);
}

nlohmann::json ToJson(const Calibration& c) {
  return {{"epsilon", c.epsilon},
          {"delta", c.delta},
          {"q", c.q},
          {"steps", c.steps},
          {"sigma", c.sigma},
          {"minimizing_order", c.minimizing_order},
          {"epsilon_spent", c.epsilon_spent},
          {"batch_size", c.batch_size},
          {"dataset_size", c.dataset_size},
          {"order_grid_version", kOrderGridVersion}};
}

Calibration CalibrationFromJson(const nlohmann::json& j) {
  Calibration c;
  c.epsilon = j.at("epsilon").get<double>();
  c.delta = j.at("delta").get<double>();
  c.q = j.at("q").get<double>();
  c.steps = j.at("steps").get<int64_t>();
  c.sigma = j.at("sigma").get<double>();
  c.minimizing_order = j.at("minimizing_order").get<double>();
  c.epsilon_spent = j.value("epsilon_spent", 0.0);
  c.batch_size = j.value("batch_size", int64_t{0});
  c.dataset_size = j.value("dataset_size", int64_t{0});
  return c;
}

Calibration ComputeNoiseMultiplier(double epsilon, double delta,
                                   int64_t batch_size, int64_t dataset_size,
                                   int64_t steps) {
  Require(epsilon > 0.0 && std::isfinite(epsilon),
          "privacy.epsilon: must be a finite value > 0");
  Require(delta > 0.0 && delta < 1.0, "privacy.delta: must lie in (0, 1)");
  Require(dataset_size >= 1, "privacy.dataset_size: must be >= 1");
  Require(batch_size >= 1 && batch_size <= dataset_size,
          "privacy.batch_size: must lie in [1, dataset_size]");
  Require(steps >= 1, "privacy.steps: must be >= 1");
  const double q = static_cast<double>(batch_size) / dataset_size;
  auto eps_at = [&](double sigma) {
    return ComputeEpsilon(q, sigma, steps, delta).epsilon;
  };
  double lo = kSigmaLow;
  double hi = kSigmaHigh;
  if (eps_at(hi) > epsilon) {
    throw RuntimeFailure(
        "calibrate: target epsilon " + std::to_string(epsilon) +
        " is unreachable with sigma <= " + std::to_string(kSigmaHigh));
  }
  if (eps_at(lo) <= epsilon) {
    hi = lo;
  } else {
    while (hi - lo > kSigmaTolerance) {
      const double mid = 0.5 * (lo + hi);
      (eps_at(mid) <= epsilon ? hi : lo) = mid;
    }
  }
  const EpsilonAtOrder spent = ComputeEpsilon(q, hi, steps, delta);
  Calibration c;
  c.epsilon = epsilon;
  c.delta = delta;
  c.q = q;
  c.steps = steps;
  c.sigma = hi;
  c.minimizing_order = spent.order;
  c.epsilon_spent = spent.epsilon;
  c.batch_size = batch_size;
  c.dataset_size = dataset_size;
  return c;
}

}  // namespace noe::privacy
