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


#include "core/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "core/dp_sgd.hpp"
#include "core/optimizer.hpp"
#include "core/transformer.hpp"

namespace noe::train {
namespace {

using corpus::Corpus;
using corpus::Split;
using corpus::TokenBlock;
using model::ModelParams;
using model::Selection;
using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct StageSpec {
  int stage = 1;
  Selection sel;
  int epochs = 0;
  int batch = 1;
  std::optional<privacy::StepPrivacy> dp;  // nullopt: no clipping or noise
  model::GradOptions grad;
  int domain = -1;  // restrict to one domain's documents
};

int64_t StepsPerEpoch(int64_t n, int batch) { return (n + batch - 1) / batch; }

std::vector<TokenBlock> EpochBlocks(const Corpus& corpus, int length,
                                    uint64_t seed, int epoch, int domain) {
  auto blocks = corpus::SampleEpochBlocks(corpus, length, seed, epoch);
  if (domain < 0) return blocks;
  std::vector<TokenBlock> kept;
  for (auto& b : blocks) {
    if (b.domain == domain) kept.push_back(std::move(b));
  }
  return kept;
}

bool HasTestSplit(const Corpus& corpus) {
  for (int k = 0; k < corpus.num_domains(); ++k) {
    if (corpus.Count(Split::kTest, k) == 0) return false;
  }
  return true;
}

void CheckFinite(const privacy::StepStats& stats, int stage, int64_t step) {
  if (!std::isfinite(stats.mean_loss)) {
    std::ostringstream msg;
    msg << "training diverged: non-finite loss at stage " << stage << " step "
        << step << " (mean pre-clip grad norm " << stats.mean_grad_norm << ")";
    throw RuntimeFailure(msg.str());
  }
}

int64_t RunStage(ModelParams<float>& params, const Corpus& corpus,
                 const TrainPlan& plan, const StageSpec& s, RunRecord& record,
                 const MetricSink& sink) {
  if (s.epochs == 0) return 0;
  const int length = params.config.context_length;
  const int64_t n = s.domain < 0
                        ? static_cast<int64_t>(corpus.CountTrain())
                        : static_cast<int64_t>(corpus.Count(Split::kTrain, s.domain));
  Require(n > 0, "train: no training documents for stage " +
                     std::to_string(s.stage));
  const int64_t total = s.epochs * StepsPerEpoch(n, s.batch);
  Optimizer optimizer(plan.optimizer, model::CountParameters(params, s.sel));
  Rng noise = MakeRng(MixSeed(plan.seed, kStreamNoise), s.stage);
  const uint64_t sample_seed = MixSeed(plan.seed, s.stage);
  const bool eval = plan.eval_every > 0 && HasTestSplit(corpus);
  int64_t step = 0;
  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    const auto blocks = EpochBlocks(corpus, length, sample_seed, epoch, s.domain);
    for (std::size_t b = 0; b < blocks.size(); b += s.batch) {
      const std::size_t size = std::min<std::size_t>(s.batch, blocks.size() - b);
      const std::span<const TokenBlock> batch(blocks.data() + b, size);
      const double lr = LearningRate(plan.EtaForStage(s.stage), step,
                                     plan.warmup_steps, total);
      privacy::StepPrivacy dp{kInf, 0.0, static_cast<double>(size)};
      if (s.dp) dp = *s.dp;
      const auto stats = privacy::DpSgdStep(params, s.sel, batch, dp, optimizer,
                                            lr, noise, s.grad);
      ++step;
      CheckFinite(stats, s.stage, step);
      MetricRecord m{step, s.stage, stats.mean_loss, stats.mean_grad_norm, lr,
                     epoch + 1};
      record.metrics.push_back(m);
      if (sink) sink(m);
    }
    if (eval && (epoch + 1) % plan.eval_every == 0) {
      const auto r = eval::Evaluate(params, corpus, length, "", plan.seed,
                                    epoch + 1);
      record.evals.push_back({s.stage, epoch + 1, r.per_domain_accuracy});
    }
  }
  return step;
}

bool TwoStage(Variant v) {
  return v == Variant::kNoesisPt || v == Variant::kNoesisRc ||
         v == Variant::kNonPrivateNoesis;
}

bool HasStage2(Variant v) { return TwoStage(v) || v == Variant::kShareNothing; }

bool TrainsBackbone(Variant v) {
  return v == Variant::kSolo || v == Variant::kMonolithic;
}

// Adds Stage-1 trainables to `p` and returns their selection.
Selection SetUpStage1(ModelParams<float>& p, const VariantSpec& v, Rng& rng) {
  const auto& c = p.config;
  Selection sel;
  auto add_prompts = [&] {
    p.prompts = model::InitPrompts<float>(c, p.backbone, rng);
    sel.prompts = true;
  };
  auto add_common = [&] {
    p.common = model::InitAdapters<float>(c, c.common_rank, rng);
    sel.common = true;
  };
  switch (v.kind) {
    case Variant::kNoesisPt:
    case Variant::kPromptOnly:
      add_prompts();
      break;
    case Variant::kNoesisRc:
    case Variant::kNonPrivateNoesis:
      if (c.n_pt > 0) add_prompts();
      if (c.common_rank > 0) add_common();
      break;
    case Variant::kCommonLora:
      add_common();
      break;
    case Variant::kSolo:
    case Variant::kMonolithic:
      sel.backbone = true;
      break;
    case Variant::kShareNothing:
      break;
  }
  return sel;
}

std::vector<std::string> TensorGroups(const ModelParams<float>& p,
                                      const Selection& sel) {
  std::vector<std::string> names;
  model::ForEachTensor(p, sel, [&](const std::string& name, const auto&) {
    names.push_back(name);
  });
  return names;
}

json CheckpointMetadata(const TrainPlan& plan, const RunRecord& record,
                        int stage) {
  json j = {{"variant", record.variant},
            {"seed", plan.seed},
            {"plan", ToJson(plan)},
            {"stage", stage},
            {"backbone_hash", record.backbone_hash}};
  j["privacy"] = plan.privacy ? ToJson(*plan.privacy) : json(nullptr);
  if (record.calibration) j["calibration"] = ToJson(*record.calibration);
  return j;
}

void WriteOutputs(const std::string& dir, const TrainPlan& plan,
                  const RunResult& result, double wall_seconds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const RunRecord& record = result.record;
  std::vector<std::string> files;
  std::string lines;
  for (const auto& m : record.metrics) lines += ToJson(m).dump() + "\n";
  WriteFileAtomic((fs::path(dir) / "metrics.jsonl").string(), lines);
  files.push_back("metrics.jsonl");
  if (result.stage1) {
    model::SaveCheckpoint((fs::path(dir) / "stage1.noe").string(),
                          *result.stage1, CheckpointMetadata(plan, record, 1));
    files.push_back("stage1.noe");
  }
  model::SaveCheckpoint((fs::path(dir) / "final.noe").string(), result.params,
                        CheckpointMetadata(plan, record, HasStage2(plan.variant.kind) ? 2 : 1));
  files.push_back("final.noe");
  json summary = ToJson(record);
  summary["model"] = model::ToJson(result.params.config);
  summary["plan"] = ToJson(plan);
  summary["privacy"] = plan.privacy ? ToJson(*plan.privacy) : json(nullptr);
  summary["checkpoints"] = json::array();
  for (const auto& f : files) {
    if (f.ends_with(".noe")) summary["checkpoints"].push_back(f);
  }
  WriteFileAtomic((fs::path(dir) / "summary.json").string(),
                  summary.dump(2) + "\n");
  files.push_back("summary.json");
  json manifest = {{"version", NOE_VERSION},
                   {"checkpoint_format", model::kCheckpointVersion},
                   {"wall_clock_seconds", wall_seconds},
                   {"files", json::object()}};
  for (const auto& f : files) {
    manifest["files"][f] = Sha256File((fs::path(dir) / f).string());
  }
  WriteFileAtomic((fs::path(dir) / "manifest.json").string(),
                  manifest.dump(2) + "\n");
}

}  // namespace

json ToJson(const MetricRecord& m) {
  return {{"step", m.step},
          {"stage", m.stage},
          {"loss", m.loss},
          {"grad_norm_preclip", m.grad_norm_preclip},
          {"lr", m.lr},
          {"epoch", m.epoch}};
}

json ToJson(const RunRecord& r) {
  json evals = json::array();
  for (const auto& e : r.evals) {
    evals.push_back({{"stage", e.stage},
                     {"epoch", e.epoch},
                     {"per_domain_accuracy", e.per_domain_accuracy}});
  }
  json j = {{"variant", r.variant},
            {"seed", r.seed},
            {"steps_stage1", r.steps_stage1},
            {"steps_stage2", r.steps_stage2},
            {"backbone_hash", r.backbone_hash},
            {"trained", {{"stage1", r.trained_stage1}, {"stage2", r.trained_stage2}}},
            {"epoch_evals", evals},
            {"final_eval", eval::ToJson(r.final_eval)},
            {"calibration", nullptr}};
  if (r.calibration) j["calibration"] = ToJson(*r.calibration);
  if (!r.metrics.empty()) j["final_loss"] = r.metrics.back().loss;
  return j;
}

PretrainResult PretrainBackbone(const Corpus& public_corpus,
                                const model::ModelConfig& config,
                                const PretrainOptions& options,
                                const MetricSink& sink) {
  config.Validate();
  Require(options.steps >= 0, "pretrain: steps must be >= 0");
  Require(options.batch >= 1, "pretrain: batch must be >= 1");
  Require(std::isfinite(options.eta) && options.eta > 0,
          "pretrain: eta must be > 0");
  Require(public_corpus.vocab_size() <= config.vocab_size,
          "pretrain: corpus vocabulary exceeds model.vocab_size");
  PretrainResult out;
  out.params.config = config;
  Rng init = MakeRng(options.seed, kStreamPretrain);
  out.params.backbone = model::InitBackbone<float>(config, init);
  if (options.steps > 0) {
    const Selection sel = Selection::Backbone();
    const model::GradOptions grad{.allow_backbone = true};
    Optimizer optimizer(OptimizerConfig{}, model::CountParameters(out.params, sel));
    const int64_t warmup = options.warmup >= 0 ? options.warmup : options.steps / 10;
    const uint64_t sample_seed = MixSeed(options.seed, kStreamPretrain);
    Rng unused(0);
    std::vector<TokenBlock> blocks;
    std::size_t cursor = 0;
    int epoch = 0;
    for (int64_t step = 0; step < options.steps; ++step) {
      if (cursor >= blocks.size()) {
        blocks = corpus::SampleEpochBlocks(public_corpus, config.context_length,
                                           sample_seed, epoch++);
        cursor = 0;
      }
      const std::size_t size =
          std::min<std::size_t>(options.batch, blocks.size() - cursor);
      const std::span<const TokenBlock> batch(blocks.data() + cursor, size);
      cursor += size;
      const double lr = LearningRate(options.eta, step, warmup, options.steps);
      const auto stats = privacy::DpSgdStep(
          out.params, sel, batch, {kInf, 0.0, static_cast<double>(size)},
          optimizer, lr, unused, grad);
      CheckFinite(stats, 0, step + 1);
      MetricRecord m{step + 1, 0, stats.mean_loss, stats.mean_grad_norm, lr, epoch};
      out.metrics.push_back(m);
      if (sink) sink(m);
    }
  }
  out.backbone_hash = model::HashSelection(out.params, Selection::Backbone());
  return out;
}

double HeldOutLoss(const ModelParams<float>& params, const Corpus& corpus) {
  std::vector<const corpus::Document*> docs;
  for (const auto& d : corpus.documents()) {
    if (d.tokens.size() >= 2) docs.push_back(&d);
  }
  Require(!docs.empty(), "held-out loss: no scorable documents");
  std::vector<double> losses(docs.size());
  const int length = params.config.context_length;
  ParallelFor(docs.size(), [&](std::size_t i) {
    const auto block = corpus::FirstWindow(*docs[i], length);
    losses[i] = model::Loss(model::Forward(params, block.domain, block), block);
  });
  double sum = 0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(losses.size());
}

int64_t PrivateDatasetSize(const TrainPlan& plan, const Corpus& corpus) {
  if (plan.variant.kind == Variant::kSolo) {
    return static_cast<int64_t>(
        corpus.Count(Split::kTrain, plan.variant.solo_domain));
  }
  return static_cast<int64_t>(corpus.CountTrain());
}

privacy::Calibration CalibrateStage1(const TrainPlan& plan,
                                     int64_t dataset_size) {
  Require(plan.privacy.has_value(), "privacy: required for calibration");
  const PrivacySpec& spec = *plan.privacy;
  Require(dataset_size >= plan.batch_stage1,
          "privacy: dataset smaller than plan.batch_stage1");
  const int64_t steps =
      plan.epochs_stage1 * StepsPerEpoch(dataset_size, plan.batch_stage1);
  if (!spec.noise_multiplier) {
    return privacy::ComputeNoiseMultiplier(spec.epsilon, spec.delta,
                                           plan.batch_stage1, dataset_size, steps);
  }
  privacy::Calibration c;
  c.epsilon = spec.epsilon;
  c.delta = spec.delta;
  c.batch_size = plan.batch_stage1;
  c.dataset_size = dataset_size;
  c.q = static_cast<double>(plan.batch_stage1) / static_cast<double>(dataset_size);
  c.steps = steps;
  c.sigma = *spec.noise_multiplier;
  if (c.sigma > 0 && steps > 0) {
    const auto e = privacy::ComputeEpsilon(c.q, c.sigma, steps, spec.delta);
    c.epsilon_spent = e.epsilon;
    c.minimizing_order = e.order;
  } else {
    c.epsilon_spent = steps > 0 ? kInf : 0.0;
  }
  return c;
}

RunResult RunVariant(const TrainPlan& plan, const ModelParams<float>& backbone,
                     const Corpus& corpus, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const model::ModelConfig& c = backbone.config;
  plan.Validate(c);
  Require(corpus.num_domains() == c.num_domains,
          "corpus: domain count differs from model.K");
  Require(corpus.vocab_size() <= c.vocab_size,
          "corpus: vocabulary exceeds model.vocab_size");
  const Variant kind = plan.variant.kind;

  RunResult result;
  RunRecord& record = result.record;
  record.variant = ToString(plan.variant);
  record.seed = plan.seed;
  ModelParams<float>& p = result.params;
  p.config = c;
  p.backbone = backbone.backbone;
  record.backbone_hash = model::HashSelection(p, Selection::Backbone());

  // Calibrate before touching any data.
  StageSpec s1;
  s1.stage = 1;
  s1.epochs = plan.epochs_stage1;
  s1.batch = plan.batch_stage1;
  s1.domain = kind == Variant::kSolo ? plan.variant.solo_domain : -1;
  s1.grad.allow_backbone = TrainsBackbone(kind);
  if (IsPrivate(kind)) {
    record.calibration = CalibrateStage1(plan, PrivateDatasetSize(plan, corpus));
    s1.dp = privacy::StepPrivacy{plan.privacy->clip_norm,
                                 record.calibration->sigma,
                                 static_cast<double>(plan.batch_stage1)};
  }

  Rng init = MakeRng(plan.seed, kStreamInit);
  s1.sel = SetUpStage1(p, plan.variant, init);
  if (!s1.sel.Empty()) {
    record.trained_stage1 = TensorGroups(p, s1.sel);
    record.steps_stage1 = RunStage(p, corpus, plan, s1, record, options.sink);
  }
  if (!TrainsBackbone(kind) &&
      model::HashSelection(p, Selection::Backbone()) != record.backbone_hash) {
    throw RuntimeFailure("internal: backbone changed during stage 1");
  }

  if (HasStage2(kind)) {
    if (TwoStage(kind)) result.stage1 = p;
    const Selection shared = model::FullSelection(p.prompts.has_value(), false,
                                           p.common.has_value());
    const std::string shared_hash = model::HashSelection(p, shared);
    Rng expert_init = MakeRng(plan.seed, kStreamExpertInit);
    for (int k = 0; k < c.num_domains; ++k) {
      p.experts.push_back(model::InitAdapters<float>(c, c.rank, expert_init));
    }
    StageSpec s2;
    s2.stage = 2;
    s2.sel = Selection::Experts();
    s2.epochs = plan.epochs_stage2;
    s2.batch = plan.batch_stage2;
    record.trained_stage2 = TensorGroups(p, s2.sel);
    record.steps_stage2 = RunStage(p, corpus, plan, s2, record, options.sink);
    if (model::HashSelection(p, shared) != shared_hash) {
      throw RuntimeFailure("internal: stage 2 modified shared or backbone parameters");
    }
  }

  if (HasTestSplit(corpus)) {
    record.final_eval =
        eval::Evaluate(p, corpus, c.context_length, record.variant, plan.seed,
                       plan.epochs_stage1 + plan.epochs_stage2);
  } else {
    record.final_eval.variant = record.variant;
    record.final_eval.seed = plan.seed;
  }
  if (!options.out_dir.empty()) {
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start).count();
    WriteOutputs(options.out_dir, plan, result, wall);
  }
  return result;
}

Surgery ParseSurgery(const std::string& name) {
  if (name == "remove_shared_prompts") return Surgery::kRemoveSharedPrompts;
  if (name == "remove_domain_experts") return Surgery::kRemoveDomainExperts;
  Fail("surgery: unknown '" + name +
       "' (expected remove_shared_prompts or remove_domain_experts)");
}

std::string ToString(Surgery s) {
  return s == Surgery::kRemoveSharedPrompts ? "remove_shared_prompts"
                                            : "remove_domain_experts";
}

model::Checkpoint Ablate(const model::Checkpoint& checkpoint, Surgery surgery) {
  if (checkpoint.metadata.contains("ablation")) {
    Fail("ablate: checkpoint already had " +
         checkpoint.metadata.at("ablation").dump() + "; double surgery rejected");
  }
  model::Checkpoint out = checkpoint;
  ModelParams<float>& p = out.params;
  if (surgery == Surgery::kRemoveSharedPrompts) {
    Require(p.prompts.has_value(), "ablate: checkpoint has no shared prompts");
    const int n_pt = p.config.n_pt;
    const int length = p.config.context_length;
    model::Matrix<float> pos = p.backbone.pos_emb.bottomRows(length);
    p.backbone.pos_emb = pos;
    p.config.n_pt = 0;
    p.prompts.reset();
    out.metadata["ablated_n_pt"] = n_pt;
  } else {
    Require(!p.experts.empty(), "ablate: checkpoint has no domain experts");
    p.experts.clear();
  }
  out.metadata["ablation"] = ToString(surgery);
  out.metadata["model"] = model::ToJson(p.config);
  return out;
}

model::Checkpoint ExportDomain(const model::Checkpoint& checkpoint, int domain) {
  const auto& c = checkpoint.params.config;
  Require(domain >= 0 && domain < c.num_domains,
          "export: domain " + std::to_string(domain) + " outside [0, K)");
  model::Checkpoint out;
  out.params = model::MergeForDeployment(checkpoint.params, domain);
  out.metadata = checkpoint.metadata;
  out.metadata["deployed_domain"] = domain;
  return out;
}

}  // namespace noe::train
