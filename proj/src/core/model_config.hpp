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

#ifndef NOE_CORE_MODEL_CONFIG_HPP_
#define NOE_CORE_MODEL_CONFIG_HPP_

#include <string>

#include "json.hpp"

namespace noe::model {

struct ModelConfig {
  int d_model = 64;
  int d_ff = 256;
  int n_layers = 2;
  int n_heads = 4;
  int vocab_size = 128;
  int context_length = 64;
  int n_pt = 8;
  int num_domains = 3;
  int rank = 8;
  int common_rank = 2;  // 0 disables the common adapter
  double alpha = 0.125;

  int head_dim() const { return d_model / n_heads; }
  // Sequence length seen by attention when prompts are attached.
  int max_sequence() const { return n_pt + context_length; }

  void Validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json ToJson(const ModelConfig& c);
// Strict: unknown keys and wrong types are rejected with a message naming
// `<path>.<field>`. A missing alpha defaults to 1/rank.
ModelConfig ModelConfigFromJson(const nlohmann::json& j,
                                const std::string& path = "model");

// Throws ValidationError listing `path.key` for the first key of `j` not in
// `allowed`.
void RejectUnknownKeys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed);

}  // namespace noe::model

#endif  // NOE_CORE_MODEL_CONFIG_HPP_
