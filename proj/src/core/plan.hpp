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


// Training plans and run configuration files. Parsing is strict: unknown
// keys, wrong types and incoherent combinations are rejected with the
// offending field path.

#ifndef NOE_CORE_PLAN_HPP_
#define NOE_CORE_PLAN_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "core/model_config.hpp"
#include "core/optimizer.hpp"
#include "json.hpp"

namespace noe::train {

enum class Variant {
  kNoesisPt,
  kNoesisRc,
  kShareNothing,
  kSolo,
  kMonolithic,
  kCommonLora,
  kPromptOnly,
  kNonPrivateNoesis,
};

struct VariantSpec {
  Variant kind = Variant::kNoesisPt;
  int solo_domain = -1;  // only for kSolo

  bool operator==(const VariantSpec&) const = default;
};

// "noesis_pt", ..., "solo(2)".
VariantSpec ParseVariant(const std::string& name);
std::string ToString(const VariantSpec& v);

// Variants that run DP-SGD and therefore need a privacy block.
bool IsPrivate(Variant v);

struct PrivacySpec {
  double epsilon = 0.0;
  double delta = 0.0;
  double clip_norm = 0.0;
  // Bypasses calibration. Tests use 0 to check degeneracy.
  std::optional<double> noise_multiplier;
};

struct TrainPlan {
  VariantSpec variant;
  double eta = 1e-3;
  // Stage-2 (expert) learning rate; unset means eta.
  std::optional<double> eta_stage2;
  int warmup_steps = 50;
  int epochs_stage1 = 12;
  int epochs_stage2 = 12;
  int batch_stage1 = 24;
  int batch_stage2 = 16;
  OptimizerConfig optimizer;
  uint64_t seed = 0;
  std::optional<PrivacySpec> privacy;
  // Evaluate on the test split every this many epochs (0 = final only).
  int eval_every = 1;

  double EtaForStage(int stage) const {
    return stage == 2 && eta_stage2 ? *eta_stage2 : eta;
  }

  // Throws ValidationError naming the field, e.g. "privacy.epsilon".
  void Validate(const model::ModelConfig& model) const;
};

struct RunConfig {
  model::ModelConfig model;
  TrainPlan plan;
  std::string backbone_path;  // empty: random initialization
};

nlohmann::json ToJson(const PrivacySpec& p);
nlohmann::json ToJson(const TrainPlan& p);  // without privacy and seed
nlohmann::json ToJson(const RunConfig& c);

PrivacySpec PrivacySpecFromJson(const nlohmann::json& j,
                                const std::string& path = "privacy");
// Parses the "plan" block; privacy and seed come from the enclosing config.
TrainPlan TrainPlanFromJson(const nlohmann::json& j,
                            const std::string& path = "plan");
// {"model", "plan", "privacy", "backbone", "seed"}; validated as a whole.
RunConfig RunConfigFromJson(const nlohmann::json& j);
RunConfig LoadRunConfig(const std::string& path);

}  // namespace noe::train

#endif  // NOE_CORE_PLAN_HPP_
