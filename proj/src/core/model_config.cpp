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

#include "core/model_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "core/common.hpp"

namespace noe::model {

void RejectUnknownKeys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
  Require(j.is_object(), path + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    Require(known, path + "." + key + ": unknown key");
  }
}

namespace {

int GetInt(const nlohmann::json& j, const std::string& path, const char* key,
           int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  Require(v.is_number_integer(), path + "." + key + ": expected an integer");
  return v.get<int>();
}

}  // namespace

void ModelConfig::Validate() const {
  Require(d_model >= 1, "model.d_model: must be >= 1");
  Require(d_ff >= 1, "model.d_ff: must be >= 1");
  Require(n_layers >= 1, "model.n_layers: must be >= 1");
  Require(n_heads >= 1, "model.n_heads: must be >= 1");
  Require(d_model % n_heads == 0,
          "model.n_heads: d_model must be divisible by n_heads");
  Require(vocab_size >= 2, "model.vocab_size: must be >= 2");
  Require(context_length >= 2, "model.context_length: must be >= 2");
  Require(n_pt >= 0, "model.n_pt: must be >= 0");
  Require(num_domains >= 1, "model.K: must be >= 1");
  Require(rank >= 1, "model.r: must be >= 1");
  Require(common_rank >= 0, "model.r_c: must be >= 0");
  Require(std::isfinite(alpha), "model.alpha: must be finite");
}

nlohmann::json ToJson(const ModelConfig& c) {
  return {{"d_model", c.d_model},   {"d_ff", c.d_ff},
          {"n_layers", c.n_layers}, {"n_heads", c.n_heads},
          {"vocab_size", c.vocab_size}, {"context_length", c.context_length},
          {"n_pt", c.n_pt},         {"K", c.num_domains},
          {"r", c.rank},            {"r_c", c.common_rank},
          {"alpha", c.alpha}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j,
                                const std::string& path) {
  RejectUnknownKeys(j, path,
                    {"d_model", "d_ff", "n_layers", "n_heads", "vocab_size",
                     "context_length", "n_pt", "K", "r", "r_c", "alpha"});
  ModelConfig c;
  c.d_model = GetInt(j, path, "d_model", c.d_model);
  c.d_ff = GetInt(j, path, "d_ff", c.d_ff);
  c.n_layers = GetInt(j, path, "n_layers", c.n_layers);
  c.n_heads = GetInt(j, path, "n_heads", c.n_heads);
  c.vocab_size = GetInt(j, path, "vocab_size", c.vocab_size);
  c.context_length = GetInt(j, path, "context_length", c.context_length);
  c.n_pt = GetInt(j, path, "n_pt", c.n_pt);
  c.num_domains = GetInt(j, path, "K", c.num_domains);
  c.rank = GetInt(j, path, "r", c.rank);
  c.common_rank = GetInt(j, path, "r_c", c.common_rank);
  if (j.contains("alpha")) {
    Require(j.at("alpha").is_number(), path + ".alpha: expected a number");
    c.alpha = j.at("alpha").get<double>();
  } else {
    c.alpha = 1.0 / std::max(1, c.rank);
  }
  try {
    c.Validate();
  } catch (const ValidationError& e) {
    // Re-root the message at the caller's path.
    std::string msg = e.what();
    if (path != "model" && msg.rfind("model.", 0) == 0) {
      msg = path + msg.substr(std::strlen("model"));
    }
    throw ValidationError(msg);
  }
  return c;
}

}  // namespace noe::model
