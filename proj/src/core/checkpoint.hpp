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


// Binary checkpoint: "NOE1", u32 format version, u64-prefixed JSON metadata,
// then named float32 tensor sections until end of file. Little-endian.

#ifndef NOE_CORE_CHECKPOINT_HPP_
#define NOE_CORE_CHECKPOINT_HPP_

#include <cstdint>
#include <string>

#include "core/params.hpp"
#include "json.hpp"

namespace noe::model {

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json metadata;  // always carries "model" (ModelConfig)
  ModelParams<float> params;
};

// Writes every present tensor. The "model" key of `metadata` is overwritten
// with params.config.
void SaveCheckpoint(const std::string& path, const ModelParams<float>& params,
                    nlohmann::json metadata);
Checkpoint LoadCheckpoint(const std::string& path);

// Section names stored in a checkpoint file, in file order.
std::vector<std::string> ListSections(const std::string& path);

}  // namespace noe::model

#endif  // NOE_CORE_CHECKPOINT_HPP_
