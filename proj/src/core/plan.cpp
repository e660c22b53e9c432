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


#include "core/plan.hpp"

#include <cmath>
#include <fstream>
#include <regex>

#include "core/common.hpp"

namespace noe::train {
namespace {

using nlohmann::json;

struct VariantName {
  Variant kind;
  const char* name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::kNoesisPt, "noesis_pt"},
    {Variant::kNoesisRc, "noesis_rc"},
    {Variant::kShareNothing, "share_nothing"},
    {Variant::kSolo, "solo"},
    {Variant::kMonolithic, "monolithic"},
    {Variant::kCommonLora, "common_lora"},
    {Variant::kPromptOnly, "prompt_only"},
    {Variant::kNonPrivateNoesis, "non_private_noesis"},
};

double GetNumber(const json& j, const std::string& path, const char* key,
                 double fallback) {
  if (!j.contains(key)) return fallback;
  Require(j.at(key).is_number(), path + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

double RequireNumber(const json& j, const std::string& path, const char* key) {
  Require(j.contains(key), path + "." + key + ": required");
  return GetNumber(j, path, key, 0.0);
}

int GetInt(const json& j, const std::string& path, const char* key,
           int fallback) {
  if (!j.contains(key)) return fallback;
  Require(j.at(key).is_number_integer(),
          path + "." + key + ": expected an integer");
  return j.at(key).get<int>();
}

}  // namespace

VariantSpec ParseVariant(const std::string& name) {
  static const std::regex solo(R"(solo\((\d+)\))");
  std::smatch m;
  if (std::regex_match(name, m, solo)) {
    return {Variant::kSolo, std::stoi(m[1].str())};
  }
  for (const auto& v : kVariantNames) {
    if (name == v.name && v.kind != Variant::kSolo) return {v.kind, -1};
  }
  Fail("plan.variant: unknown variant '" + name + "'");
}

std::string ToString(const VariantSpec& v) {
  if (v.kind == Variant::kSolo) {
    return "solo(" + std::to_string(v.solo_domain) + ")";
  }
  for (const auto& n : kVariantNames) {
    if (n.kind == v.kind) return n.name;
  }
  return "unknown";
}

bool IsPrivate(Variant v) {
  switch (v) {
    case Variant::kShareNothing:
    case Variant::kNonPrivateNoesis:
      return false;
    default:
      return true;
  }
}

void TrainPlan::Validate(const model::ModelConfig& model) const {
  const std::string name = ToString(variant);
  Require(std::isfinite(eta) && eta > 0, "plan.eta: must be > 0");
  if (eta_stage2) {
    Require(std::isfinite(*eta_stage2) && *eta_stage2 > 0,
            "plan.eta_stage2: must be > 0");
  }
  Require(warmup_steps >= 0, "plan.warmup_steps: must be >= 0");
  Require(epochs_stage1 >= 0, "plan.epochs_stage1: must be >= 0");
  Require(epochs_stage2 >= 0, "plan.epochs_stage2: must be >= 0");
  Require(batch_stage1 >= 1, "plan.batch_stage1: must be >= 1");
  Require(batch_stage2 >= 1, "plan.batch_stage2: must be >= 1");
  Require(eval_every >= 0, "plan.eval_every: must be >= 0");
  Require(std::isfinite(optimizer.weight_decay) && optimizer.weight_decay >= 0,
          "plan.weight_decay: must be >= 0");
  if (IsPrivate(variant.kind)) {
    Require(privacy.has_value(), "privacy: required for variant " + name);
    const PrivacySpec& p = *privacy;
    Require(std::isfinite(p.epsilon) && p.epsilon > 0,
            "privacy.epsilon: must be > 0");
    Require(p.delta > 0 && p.delta < 1, "privacy.delta: must be in (0, 1)");
    Require(std::isfinite(p.clip_norm) && p.clip_norm > 0,
            "privacy.clip_norm: must be > 0");
    if (p.noise_multiplier) {
      Require(std::isfinite(*p.noise_multiplier) && *p.noise_multiplier >= 0,
              "privacy.noise_multiplier: must be >= 0");
    }
  } else {
    Require(!privacy.has_value(),
            "privacy: must be null for non-private variant " + name);
  }
  auto single_stage = [&] {
    Require(epochs_stage2 == 0,
            "plan.epochs_stage2: must be 0 for variant " + name);
  };
  switch (variant.kind) {
    case Variant::kNoesisPt:
      Require(model.n_pt > 0, "model.n_pt: variant noesis_pt needs prompts");
      break;
    case Variant::kNoesisRc:
      Require(model.common_rank > 0,
              "model.r_c: variant noesis_rc needs a common adapter");
      break;
    case Variant::kNonPrivateNoesis:
      Require(model.n_pt > 0 || model.common_rank > 0,
              "model.n_pt: non_private_noesis needs prompts or a common adapter");
      break;
    case Variant::kPromptOnly:
      Require(model.n_pt > 0, "model.n_pt: variant prompt_only needs prompts");
      single_stage();
      break;
    case Variant::kCommonLora:
      Require(model.common_rank > 0,
              "model.r_c: variant common_lora needs a common adapter");
      single_stage();
      break;
    case Variant::kShareNothing:
      Require(epochs_stage1 == 0,
              "plan.epochs_stage1: must be 0 for variant share_nothing");
      break;
    case Variant::kSolo:
      Require(variant.solo_domain >= 0 &&
                  variant.solo_domain < model.num_domains,
              "plan.variant: solo domain out of range");
      single_stage();
      break;
    case Variant::kMonolithic:
      single_stage();
      break;
  }
}

json ToJson(const PrivacySpec& p) {
  json j = {{"epsilon", p.epsilon},
            {"delta", p.delta},
            {"clip_norm", p.clip_norm}};
  if (p.noise_multiplier) j["noise_multiplier"] = *p.noise_multiplier;
  return j;
}

json ToJson(const TrainPlan& p) {
  json j = {{"variant", ToString(p.variant)},
          {"eta", p.eta},
          {"warmup_steps", p.warmup_steps},
          {"epochs_stage1", p.epochs_stage1},
          {"epochs_stage2", p.epochs_stage2},
          {"batch_stage1", p.batch_stage1},
          {"batch_stage2", p.batch_stage2},
          {"optimizer", ToString(p.optimizer.kind)},
          {"weight_decay", p.optimizer.weight_decay},
          {"eval_every", p.eval_every}};
  if (p.eta_stage2) j["eta_stage2"] = *p.eta_stage2;
  return j;
}

json ToJson(const RunConfig& c) {
  json j = {{"model", model::ToJson(c.model)},
            {"plan", ToJson(c.plan)},
            {"privacy", nullptr},
            {"seed", c.plan.seed}};
  if (c.plan.privacy) j["privacy"] = ToJson(*c.plan.privacy);
  if (!c.backbone_path.empty()) j["backbone"] = c.backbone_path;
  return j;
}

PrivacySpec PrivacySpecFromJson(const json& j, const std::string& path) {
  model::RejectUnknownKeys(j, path,
                           {"epsilon", "delta", "clip_norm", "noise_multiplier"});
  PrivacySpec p;
  // No defaults: every privacy parameter is spelled out.
  p.epsilon = RequireNumber(j, path, "epsilon");
  p.delta = RequireNumber(j, path, "delta");
  p.clip_norm = RequireNumber(j, path, "clip_norm");
  if (j.contains("noise_multiplier") && !j.at("noise_multiplier").is_null()) {
    p.noise_multiplier = RequireNumber(j, path, "noise_multiplier");
  }
  return p;
}

TrainPlan TrainPlanFromJson(const json& j, const std::string& path) {
  model::RejectUnknownKeys(
      j, path,
      {"variant", "eta", "eta_stage2", "warmup_steps", "epochs_stage1", "epochs_stage2",
       "batch_stage1", "batch_stage2", "optimizer", "weight_decay",
       "eval_every"});
  TrainPlan p;
  Require(j.contains("variant"), path + ".variant: required");
  Require(j.at("variant").is_string(), path + ".variant: expected a string");
  p.variant = ParseVariant(j.at("variant").get<std::string>());
  p.eta = GetNumber(j, path, "eta", p.eta);
  if (j.contains("eta_stage2") && !j.at("eta_stage2").is_null()) {
    p.eta_stage2 = GetNumber(j, path, "eta_stage2", p.eta);
  }
  p.warmup_steps = GetInt(j, path, "warmup_steps", p.warmup_steps);
  p.epochs_stage1 = GetInt(j, path, "epochs_stage1", p.epochs_stage1);
  p.epochs_stage2 = GetInt(j, path, "epochs_stage2", p.epochs_stage2);
  p.batch_stage1 = GetInt(j, path, "batch_stage1", p.batch_stage1);
  p.batch_stage2 = GetInt(j, path, "batch_stage2", p.batch_stage2);
  p.eval_every = GetInt(j, path, "eval_every", p.eval_every);
  if (j.contains("optimizer")) {
    Require(j.at("optimizer").is_string(),
            path + ".optimizer: expected a string");
    try {
      p.optimizer.kind = ParseOptimizerKind(j.at("optimizer").get<std::string>());
    } catch (const ValidationError& e) {
      Fail(path + ".optimizer: " + e.what());
    }
  }
  p.optimizer.weight_decay =
      GetNumber(j, path, "weight_decay", p.optimizer.weight_decay);
  return p;
}

RunConfig RunConfigFromJson(const json& j) {
  model::RejectUnknownKeys(j, "config",
                           {"model", "plan", "privacy", "backbone", "seed"});
  Require(j.contains("model"), "model: required");
  Require(j.contains("plan"), "plan: required");
  RunConfig c;
  c.model = model::ModelConfigFromJson(j.at("model"), "model");
  c.plan = TrainPlanFromJson(j.at("plan"), "plan");
  if (j.contains("privacy") && !j.at("privacy").is_null()) {
    c.plan.privacy = PrivacySpecFromJson(j.at("privacy"), "privacy");
  }
  if (j.contains("seed")) {
    Require(j.at("seed").is_number_unsigned(),
            "seed: expected a non-negative integer");
    c.plan.seed = j.at("seed").get<uint64_t>();
  }
  if (j.contains("backbone")) {
    Require(j.at("backbone").is_string(), "backbone: expected a path string");
    c.backbone_path = j.at("backbone").get<std::string>();
  }
  c.plan.Validate(c.model);
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  json j;
  try {
    j = json::parse(ReadFile(path));
  } catch (const json::parse_error& e) {
    Fail(path + ": malformed JSON: " + e.what());
  }
  return RunConfigFromJson(j);
}

}  // namespace noe::train
