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


#include "noe/noe.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>

#include "core/attack.hpp"
#include "core/checkpoint.hpp"
#include "core/corpus.hpp"
#include "core/eval.hpp"
#include "core/plan.hpp"
#include "core/rdp.hpp"
#include "core/trainer.hpp"
#include "json.hpp"

struct noe_corpus {
  noe::corpus::Corpus value;
};

struct noe_model {
  noe::model::Checkpoint value;
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

// Runs fn, mapping exceptions onto status codes.
template <typename Fn>
noe_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return NOE_OK;
  } catch (const noe::ValidationError& e) {
    g_last_error = e.what();
    return NOE_ERR_VALIDATION;
  } catch (const json::exception& e) {
    g_last_error = std::string("malformed JSON input: ") + e.what();
    return NOE_ERR_VALIDATION;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NOE_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown failure";
    return NOE_ERR_RUNTIME;
  }
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void NotNull(const void* p, const char* what) {
  noe::Require(p != nullptr, std::string(what) + " must not be NULL");
}

json ParseJson(const char* text, const char* what) {
  NotNull(text, what);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    noe::Fail(std::string(what) + ": malformed JSON: " + e.what());
  }
}

}  // namespace

extern "C" {

const char* noe_version(void) { return NOE_VERSION; }

uint32_t noe_checkpoint_format_version(void) {
  return noe::model::kCheckpointVersion;
}

const char* noe_last_error(void) { return g_last_error.c_str(); }

void noe_string_free(char* s) { std::free(s); }

void noe_set_threads(int n) { noe::SetWorkerThreads(n); }

noe_status noe_corpus_generate(const char* spec_json, double test_fraction,
                               uint64_t seed, noe_corpus** out) {
  return Guard([&] {
    NotNull(out, "out");
    const auto spec = noe::corpus::SyntheticSpecFromJson(ParseJson(spec_json, "spec"));
    auto c = noe::corpus::GenerateSyntheticCorpus(spec);
    if (test_fraction > 0) c = noe::corpus::SplitTrainTest(c, test_fraction, seed);
    *out = new noe_corpus{std::move(c)};
  });
}

noe_status noe_corpus_generate_public(const char* spec_json, int num_docs,
                                      int max_tokens, noe_corpus** out) {
  return Guard([&] {
    NotNull(out, "out");
    const auto spec = noe::corpus::SyntheticSpecFromJson(ParseJson(spec_json, "spec"));
    *out = new noe_corpus{
        noe::corpus::GeneratePublicCorpus(spec, num_docs, max_tokens)};
  });
}

noe_status noe_corpus_load(const char* path, noe_corpus** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new noe_corpus{noe::corpus::LoadJsonl(path)};
  });
}

noe_status noe_corpus_save(const noe_corpus* corpus, const char* path) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(path, "path");
    noe::corpus::SaveJsonl(corpus->value, path);
  });
}

noe_status noe_corpus_manifest(const noe_corpus* corpus, char** out) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    *out = CopyString(noe::corpus::Manifest(corpus->value).dump(2));
  });
}

void noe_corpus_free(noe_corpus* corpus) { delete corpus; }

noe_status noe_model_load(const char* path, noe_model** out) {
  return Guard([&] {
    NotNull(path, "path");
    NotNull(out, "out");
    *out = new noe_model{noe::model::LoadCheckpoint(path)};
  });
}

noe_status noe_model_save(const noe_model* model, const char* path) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(path, "path");
    noe::model::SaveCheckpoint(path, model->value.params, model->value.metadata);
  });
}

noe_status noe_model_metadata(const noe_model* model, char** out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(out, "out");
    json j = model->value.metadata;
    j["model"] = noe::model::ToJson(model->value.params.config);
    *out = CopyString(j.dump(2));
  });
}

noe_status noe_model_sections(const noe_model* model, char** out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(out, "out");
    json names = json::array();
    const auto& p = model->value.params;
    noe::model::ForEachTensor(p, noe::model::PresentSelection(p),
                              [&](const std::string& name, const auto&) {
                                names.push_back(name);
                              });
    *out = CopyString(names.dump());
  });
}

void noe_model_free(noe_model* model) { delete model; }

noe_status noe_pretrain(const noe_corpus* public_corpus, const char* model_json,
                        const char* options_json, noe_model** out,
                        char** metrics_jsonl) {
  return Guard([&] {
    NotNull(public_corpus, "public_corpus");
    NotNull(out, "out");
    const auto config = noe::model::ModelConfigFromJson(ParseJson(model_json, "model"));
    const json o = ParseJson(options_json, "options");
    noe::model::RejectUnknownKeys(o, "pretrain",
                                  {"steps", "batch", "eta", "warmup", "seed"});
    noe::train::PretrainOptions options;
    options.steps = o.value("steps", options.steps);
    options.batch = o.value("batch", options.batch);
    options.eta = o.value("eta", options.eta);
    options.warmup = o.value("warmup", options.warmup);
    options.seed = o.value("seed", options.seed);
    auto result = noe::train::PretrainBackbone(public_corpus->value, config, options);
    std::string lines;
    for (const auto& m : result.metrics) lines += noe::train::ToJson(m).dump() + "\n";
    json meta = {{"kind", "backbone"},
                 {"pretrain",
                  {{"steps", options.steps},
                   {"batch", options.batch},
                   {"eta", options.eta},
                   {"seed", options.seed}}},
                 {"backbone_hash", result.backbone_hash}};
    if (!result.metrics.empty()) meta["final_loss"] = result.metrics.back().loss;
    *out = new noe_model{{meta, std::move(result.params)}};
    if (metrics_jsonl != nullptr) *metrics_jsonl = CopyString(lines);
  });
}

noe_status noe_held_out_loss(const noe_model* model, const noe_corpus* corpus,
                             double* out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    *out = noe::train::HeldOutLoss(model->value.params, corpus->value);
  });
}

noe_status noe_calibrate(double epsilon, double delta, int64_t batch,
                         int64_t dataset_size, int64_t steps, char** out) {
  return Guard([&] {
    NotNull(out, "out");
    const auto c = noe::privacy::ComputeNoiseMultiplier(epsilon, delta, batch,
                                                        dataset_size, steps);
    *out = CopyString(noe::privacy::ToJson(c).dump(2));
  });
}

noe_status noe_config_normalize(const char* config_json, const char* base_dir,
                                int64_t seed, char** out) {
  return Guard([&] {
    NotNull(out, "out");
    json j = ParseJson(config_json, "config");
    if (seed >= 0 && j.is_object()) j["seed"] = static_cast<uint64_t>(seed);
    auto config = noe::train::RunConfigFromJson(j);
    namespace fs = std::filesystem;
    if (!config.backbone_path.empty() && base_dir != nullptr &&
        fs::path(config.backbone_path).is_relative()) {
      config.backbone_path = (fs::path(base_dir) / config.backbone_path).string();
    }
    *out = CopyString(noe::train::ToJson(config).dump(2));
  });
}

noe_status noe_train(const char* config_json, const noe_corpus* corpus,
                     const char* out_dir, char** summary_json) {
  return Guard([&] {
    NotNull(corpus, "corpus");
    NotNull(out_dir, "out_dir");
    const auto config = noe::train::RunConfigFromJson(ParseJson(config_json, "config"));
    noe::model::ModelParams<float> backbone;
    if (config.backbone_path.empty()) {
      noe::Rng rng = noe::MakeRng(config.plan.seed, noe::kStreamPretrain);
      backbone.config = config.model;
      backbone.backbone = noe::model::InitBackbone<float>(config.model, rng);
    } else {
      backbone = noe::model::LoadCheckpoint(config.backbone_path).params;
      noe::Require(backbone.config == config.model,
                   "backbone: checkpoint model configuration differs from config.model");
    }
    const auto result = noe::train::RunVariant(config.plan, backbone,
                                               corpus->value, {out_dir, {}});
    if (summary_json != nullptr) {
      *summary_json = CopyString(noe::train::ToJson(result.record).dump(2));
    }
  });
}

noe_status noe_evaluate(const noe_model* model, const noe_corpus* corpus,
                        char** out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    const auto& meta = model->value.metadata;
    const auto& p = model->value.params;
    noe::Require(corpus->value.num_domains() == p.config.num_domains,
                 "eval: corpus domain count differs from the model's K");
    const auto report = noe::eval::Evaluate(
        p, corpus->value, p.config.context_length,
        meta.value("variant", std::string("unknown")),
        meta.value("seed", uint64_t{0}),
        meta.contains("plan") ? meta["plan"].value("epochs_stage1", 0) +
                                    meta["plan"].value("epochs_stage2", 0)
                              : 0);
    json j = noe::eval::ToJson(report);
    j["macro_accuracy"] = report.MacroAccuracy();
    *out = CopyString(j.dump(2));
  });
}

noe_status noe_attack(const noe_model* model, const noe_corpus* corpus,
                      int attacker, int target, char** report_json,
                      char** roc_csv) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(corpus, "corpus");
    NotNull(report_json, "report_json");
    const auto& p = model->value.params;
    const auto report = noe::attack::CrossDomainAttack(
        p, attacker, target, corpus->value, p.config.context_length);
    *report_json = CopyString(noe::attack::ToJson(report).dump(2));
    if (roc_csv != nullptr) *roc_csv = CopyString(noe::attack::RocCsv(report.curve));
  });
}

noe_status noe_ablate(const noe_model* model, const char* surgery,
                      noe_model** out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(surgery, "surgery");
    NotNull(out, "out");
    *out = new noe_model{
        noe::train::Ablate(model->value, noe::train::ParseSurgery(surgery))};
  });
}

noe_status noe_export(const noe_model* model, int domain, noe_model** out) {
  return Guard([&] {
    NotNull(model, "model");
    NotNull(out, "out");
    *out = new noe_model{noe::train::ExportDomain(model->value, domain)};
  });
}

noe_status noe_diff(const noe_model* model_a, const noe_model* model_b,
                    const noe_corpus* corpus, int64_t doc_id, int html,
                    char** out) {
  return Guard([&] {
    NotNull(model_a, "model_a");
    NotNull(model_b, "model_b");
    NotNull(corpus, "corpus");
    NotNull(out, "out");
    const auto& doc = corpus->value.ById(doc_id);
    const auto& a = model_a->value.params;
    const auto diff = noe::eval::ComputePredictionDiff(
        a, model_b->value.params, doc.domain, doc, a.config.context_length);
    const std::string title = "document " + std::to_string(doc_id);
    *out = CopyString(html ? noe::eval::RenderHtml(diff, title)
                           : noe::eval::RenderAnsi(diff));
  });
}

}  // extern "C"
