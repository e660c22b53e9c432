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


// Backbone pretraining, the two-stage private/non-private procedure, the
// baseline variants and checkpoint surgery.

#ifndef NOE_CORE_TRAINER_HPP_
#define NOE_CORE_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/corpus.hpp"
#include "core/eval.hpp"
#include "core/params.hpp"
#include "core/plan.hpp"
#include "core/rdp.hpp"
#include "json.hpp"

namespace noe::train {

struct MetricRecord {
  int64_t step = 0;  // 1-based within the stage
  int stage = 0;     // 0 = pretraining
  double loss = 0.0;
  double grad_norm_preclip = 0.0;  // mean per-example norm
  double lr = 0.0;
  int epoch = 0;  // 1-based
};
nlohmann::json ToJson(const MetricRecord& m);

struct EpochEval {
  int stage = 0;
  int epoch = 0;
  std::vector<double> per_domain_accuracy;
};

struct RunRecord {
  std::string variant;
  uint64_t seed = 0;
  std::vector<MetricRecord> metrics;
  std::vector<EpochEval> evals;
  std::optional<privacy::Calibration> calibration;
  int64_t steps_stage1 = 0;
  int64_t steps_stage2 = 0;
  // Tensor names mutated by each stage.
  std::vector<std::string> trained_stage1;
  std::vector<std::string> trained_stage2;
  std::string backbone_hash;
  eval::EvalReport final_eval;
};

// Called after every optimizer step. Optional.
using MetricSink = std::function<void(const MetricRecord&)>;

struct PretrainOptions {
  int64_t steps = 0;
  int batch = 16;
  double eta = 3e-3;
  int64_t warmup = -1;  // -1: steps / 10
  uint64_t seed = 0;
};

struct PretrainResult {
  model::ModelParams<float> params;  // backbone only
  std::vector<MetricRecord> metrics;
  std::string backbone_hash;
};

// Ordinary next-token training of every backbone tensor on the public
// corpus. steps = 0 returns the random initialization. A non-finite loss
// aborts with RuntimeFailure.
PretrainResult PretrainBackbone(const corpus::Corpus& public_corpus,
                                const model::ModelConfig& config,
                                const PretrainOptions& options,
                                const MetricSink& sink = {});

// Mean next-token loss of the backbone over the first window of every
// document.
double HeldOutLoss(const model::ModelParams<float>& params,
                   const corpus::Corpus& corpus);

struct RunOptions {
  // Writes metrics.jsonl, summary.json, stage1.noe, final.noe and
  // manifest.json here when non-empty.
  std::string out_dir;
  MetricSink sink;
};

struct RunResult {
  model::ModelParams<float> params;
  // Parameters at the end of Stage 1 (two-stage variants only).
  std::optional<model::ModelParams<float>> stage1;
  RunRecord record;
};

// Runs `plan.variant` from the given backbone. The backbone's own prompts,
// experts or common adapter, if any, are ignored.
RunResult RunVariant(const TrainPlan& plan, const model::ModelParams<float>& backbone,
                     const corpus::Corpus& corpus, const RunOptions& options = {});

// Differentially private privacy calibration for Stage 1 of `plan` over
// `dataset_size` training documents.
privacy::Calibration CalibrateStage1(const TrainPlan& plan, int64_t dataset_size);

// Training documents a variant's private stage draws from.
int64_t PrivateDatasetSize(const TrainPlan& plan, const corpus::Corpus& corpus);

nlohmann::json ToJson(const RunRecord& r);

enum class Surgery { kRemoveSharedPrompts, kRemoveDomainExperts };
Surgery ParseSurgery(const std::string& name);
std::string ToString(Surgery s);

// Returns a modified copy; the input is never touched. Removing prompts sets
// n_pt to 0 and drops the prompt rows of the positional table so the
// remaining tokens keep their positions. A checkpoint that already went
// through surgery is rejected.
model::Checkpoint Ablate(const model::Checkpoint& checkpoint, Surgery surgery);

// Single-domain deployable model (merged backbone plus prompts).
model::Checkpoint ExportDomain(const model::Checkpoint& checkpoint, int domain);

}  // namespace noe::train

#endif  // NOE_CORE_TRAINER_HPP_
