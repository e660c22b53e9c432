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


// noe command-line entry point. Everything goes through the C interface.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "noe/noe.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Carries a status out of a subcommand handler.
struct Failure {
  noe_status status;
  std::string message;
};

void Check(noe_status s) {
  if (s != NOE_OK) throw Failure{s, noe_last_error()};
}

[[noreturn]] void Invalid(const std::string& message) {
  throw Failure{NOE_ERR_VALIDATION, message};
}

// Takes ownership of a library-allocated string.
std::string Take(char* s) {
  std::string out = s != nullptr ? s : "";
  noe_string_free(s);
  return out;
}

struct CorpusDeleter {
  void operator()(noe_corpus* c) const { noe_corpus_free(c); }
};
struct ModelDeleter {
  void operator()(noe_model* m) const { noe_model_free(m); }
};
using CorpusPtr = std::unique_ptr<noe_corpus, CorpusDeleter>;
using ModelPtr = std::unique_ptr<noe_model, ModelDeleter>;

CorpusPtr LoadCorpus(const std::string& path) {
  noe_corpus* c = nullptr;
  Check(noe_corpus_load(path.c_str(), &c));
  return CorpusPtr(c);
}

ModelPtr LoadModel(const std::string& path) {
  noe_model* m = nullptr;
  Check(noe_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{NOE_ERR_RUNTIME, "cannot open: " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{NOE_ERR_RUNTIME, "cannot write: " + path.string()};
  out << text;
}

json ParseConfigFile(const std::string& path) {
  try {
    return json::parse(ReadText(path));
  } catch (const json::parse_error& e) {
    Invalid(path + ": malformed JSON: " + e.what());
  }
}

std::string BaseDir(const std::string& path) {
  const fs::path p(path);
  return p.has_parent_path() ? p.parent_path().string() : ".";
}

struct Globals {
  int threads = 0;
  std::optional<int64_t> seed;
};

int64_t SeedOr(const Globals& g, int64_t fallback) {
  return g.seed ? *g.seed : fallback;
}

// ---- gen-corpus ----

struct GenArgs {
  int k = 3;
  std::vector<int> docs = {4000, 800, 160};
  int shared = 24;
  int priv = 24;
  int depth = 2;
  int vocab = 128;
  int min_tokens = 40;
  int max_tokens = 96;
  double shared_mix = 0.5;
  double test_fraction = 0.5;
  int public_docs = 4000;
  std::string out;
};

void GenCorpus(const GenArgs& a, const Globals& g) {
  const int64_t seed = SeedOr(g, 0);
  const json spec = {{"K", a.k},
                     {"docs_per_domain", a.docs},
                     {"shared_keyword_count", a.shared},
                     {"private_keyword_count", a.priv},
                     {"nesting_depth", a.depth},
                     {"seed", seed},
                     {"vocab_size", a.vocab},
                     {"min_doc_tokens", a.min_tokens},
                     {"max_doc_tokens", a.max_tokens},
                     {"shared_mix", a.shared_mix}};
  const std::string text = spec.dump();
  noe_corpus* raw = nullptr;
  Check(noe_corpus_generate(text.c_str(), a.test_fraction, seed, &raw));
  CorpusPtr priv(raw);
  fs::create_directories(a.out);
  const std::string corpus_path = (fs::path(a.out) / "corpus.jsonl").string();
  Check(noe_corpus_save(priv.get(), corpus_path.c_str()));
  json out = {{"corpus", corpus_path}};
  if (a.public_docs > 0) {
    Check(noe_corpus_generate_public(text.c_str(), a.public_docs, a.max_tokens, &raw));
    CorpusPtr pub(raw);
    const std::string public_path = (fs::path(a.out) / "public.jsonl").string();
    Check(noe_corpus_save(pub.get(), public_path.c_str()));
    out["public"] = public_path;
  }
  out["manifest"] = json::parse(Take([&] {
    char* m = nullptr;
    Check(noe_corpus_manifest(priv.get(), &m));
    return m;
  }()));
  std::cout << out.dump(2) << "\n";
}

// ---- pretrain ----

struct PretrainArgs {
  std::string corpus, config, out, metrics;
  int64_t steps = 1500;
  int batch = 16;
  double eta = 3e-3;
};

void Pretrain(const PretrainArgs& a, const Globals& g) {
  const json config = ParseConfigFile(a.config);
  if (!config.is_object() || !config.contains("model")) {
    Invalid("model: required in " + a.config);
  }
  const int64_t config_seed =
      config.contains("seed") && config["seed"].is_number_unsigned()
          ? config["seed"].get<int64_t>()
          : 0;
  const json options = {{"steps", a.steps},
                        {"batch", a.batch},
                        {"eta", a.eta},
                        {"seed", SeedOr(g, config_seed)}};
  auto pub = LoadCorpus(a.corpus);
  noe_model* raw = nullptr;
  char* metrics = nullptr;
  Check(noe_pretrain(pub.get(), config["model"].dump().c_str(),
                     options.dump().c_str(), &raw, &metrics));
  ModelPtr model(raw);
  const std::string lines = Take(metrics);
  Check(noe_model_save(model.get(), a.out.c_str()));
  if (!a.metrics.empty()) WriteText(a.metrics, lines);
  char* meta = nullptr;
  Check(noe_model_metadata(model.get(), &meta));
  json m = json::parse(Take(meta));
  std::cout << json{{"checkpoint", a.out},
                    {"backbone_hash", m["backbone_hash"]},
                    {"final_loss", m.value("final_loss", json(nullptr))}}
                   .dump(2)
            << "\n";
}

// ---- calibrate ----

struct CalibrateArgs {
  double epsilon = 0, delta = 0;
  int64_t batch = 0, dataset_size = 0, steps = 0;
};

void Calibrate(const CalibrateArgs& a) {
  char* out = nullptr;
  Check(noe_calibrate(a.epsilon, a.delta, a.batch, a.dataset_size, a.steps, &out));
  std::cout << Take(out) << "\n";
}

// ---- train ----

struct TrainArgs {
  std::string config, corpus, out;
};

void Train(const TrainArgs& a, const Globals& g) {
  const std::string text = ReadText(a.config);
  char* normalized = nullptr;
  Check(noe_config_normalize(text.c_str(), BaseDir(a.config).c_str(),
                             g.seed ? *g.seed : -1, &normalized));
  const std::string config = Take(normalized);
  auto corpus = LoadCorpus(a.corpus);
  char* summary = nullptr;
  Check(noe_train(config.c_str(), corpus.get(), a.out.c_str(), &summary));
  const json s = json::parse(Take(summary));
  std::cout << json{{"out", a.out},
                    {"variant", s["variant"]},
                    {"final_eval", s["final_eval"]},
                    {"calibration", s["calibration"]}}
                   .dump(2)
            << "\n";
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, corpus, out;
};

void Eval(const EvalArgs& a) {
  auto model = LoadModel(a.checkpoint);
  auto corpus = LoadCorpus(a.corpus);
  char* report = nullptr;
  Check(noe_evaluate(model.get(), corpus.get(), &report));
  const std::string text = Take(report);
  if (!a.out.empty()) WriteText(fs::path(a.out) / "eval_report.json", text + "\n");
  std::cout << text << "\n";
}

// ---- attack ----

struct AttackArgs {
  std::string checkpoint, corpus, out = ".";
  int attacker = -1, target = -1;
  bool all_pairs = false;
};

void Attack(const AttackArgs& a) {
  auto model = LoadModel(a.checkpoint);
  auto corpus = LoadCorpus(a.corpus);
  std::vector<std::pair<int, int>> pairs;
  if (a.all_pairs) {
    char* meta = nullptr;
    Check(noe_model_metadata(model.get(), &meta));
    const int k = json::parse(Take(meta))["model"]["K"].get<int>();
    for (int j = 0; j < k; ++j) {
      for (int t = 0; t < k; ++t) {
        if (j != t) pairs.emplace_back(j, t);
      }
    }
  } else {
    if (a.attacker < 0 || a.target < 0) {
      Invalid("attack: give --attacker and --target, or --all-pairs");
    }
    pairs.emplace_back(a.attacker, a.target);
  }
  json report = {{"checkpoint", a.checkpoint}, {"pairs", json::array()}};
  for (const auto& [j, t] : pairs) {
    char* r = nullptr;
    char* csv = nullptr;
    Check(noe_attack(model.get(), corpus.get(), j, t, &r, &csv));
    json pair = json::parse(Take(r));
    WriteText(fs::path(a.out) /
                  ("roc_" + std::to_string(j) + "_" + std::to_string(t) + ".csv"),
              Take(csv));
    pair.erase("curve");
    report["pairs"].push_back(pair);
  }
  WriteText(fs::path(a.out) / "attack_report.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
}

// ---- ablate / export ----

struct SurgeryArgs {
  std::string checkpoint, surgery, out;
  int domain = -1;
};

void Ablate(const SurgeryArgs& a) {
  auto model = LoadModel(a.checkpoint);
  noe_model* raw = nullptr;
  Check(noe_ablate(model.get(), a.surgery.c_str(), &raw));
  ModelPtr out(raw);
  Check(noe_model_save(out.get(), a.out.c_str()));
  std::cout << json{{"checkpoint", a.out}, {"surgery", a.surgery}}.dump(2) << "\n";
}

void Export(const SurgeryArgs& a) {
  auto model = LoadModel(a.checkpoint);
  noe_model* raw = nullptr;
  Check(noe_export(model.get(), a.domain, &raw));
  ModelPtr out(raw);
  Check(noe_model_save(out.get(), a.out.c_str()));
  char* sections = nullptr;
  Check(noe_model_sections(out.get(), &sections));
  std::cout << json{{"checkpoint", a.out},
                    {"domain", a.domain},
                    {"sections", json::parse(Take(sections))}}
                   .dump(2)
            << "\n";
}

// ---- diff ----

struct DiffArgs {
  std::string a, b, corpus, html;
  int64_t doc = -1;
};

void Diff(const DiffArgs& a) {
  auto model_a = LoadModel(a.a);
  auto model_b = LoadModel(a.b);
  auto corpus = LoadCorpus(a.corpus);
  char* text = nullptr;
  Check(noe_diff(model_a.get(), model_b.get(), corpus.get(), a.doc, 0, &text));
  std::cout << Take(text) << "\n";
  if (!a.html.empty()) {
    Check(noe_diff(model_a.get(), model_b.get(), corpus.get(), a.doc, 1, &text));
    WriteText(a.html, Take(text));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noe: private multi-domain adapters with shared prompts"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.set_version_flag(
      "--version",
      std::string("noe ") + noe_version() + " (checkpoint format " +
          std::to_string(noe_checkpoint_format_version()) + ")");
  app.add_option("--threads", g.threads,
                 "Worker threads (default: NOE_THREADS or hardware)");
  app.add_option("--seed", g.seed, "Seed for every random draw");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Generate synthetic corpora");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--K", gen.k, "Number of domains");
  gen_cmd->add_option("--docs-per-domain", gen.docs, "Documents per domain")
      ->delimiter(',');
  gen_cmd->add_option("--shared-keywords", gen.shared);
  gen_cmd->add_option("--private-keywords", gen.priv);
  gen_cmd->add_option("--nesting-depth", gen.depth);
  gen_cmd->add_option("--vocab", gen.vocab);
  gen_cmd->add_option("--min-tokens", gen.min_tokens);
  gen_cmd->add_option("--max-tokens", gen.max_tokens);
  gen_cmd->add_option("--shared-mix", gen.shared_mix);
  gen_cmd->add_option("--test-fraction", gen.test_fraction);
  gen_cmd->add_option("--public-docs", gen.public_docs,
                      "Public pretraining documents (0 = none)");

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Pretrain the backbone");
  pre_cmd->add_option("--corpus", pre.corpus, "Public corpus")->required();
  pre_cmd->add_option("--config", pre.config, "Run config (model block)")->required();
  pre_cmd->add_option("--out", pre.out, "Backbone checkpoint")->required();
  pre_cmd->add_option("--steps", pre.steps);
  pre_cmd->add_option("--batch", pre.batch);
  pre_cmd->add_option("--eta", pre.eta);
  pre_cmd->add_option("--metrics", pre.metrics, "Write per-step metrics here");

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Noise multiplier for a budget");
  cal_cmd->add_option("--epsilon", cal.epsilon)->required();
  cal_cmd->add_option("--delta", cal.delta)->required();
  cal_cmd->add_option("--batch", cal.batch)->required();
  cal_cmd->add_option("--dataset-size", cal.dataset_size)->required();
  cal_cmd->add_option("--steps", cal.steps)->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a variant");
  train_cmd->add_option("--config", tr.config)->required();
  train_cmd->add_option("--corpus", tr.corpus)->required();
  train_cmd->add_option("--out", tr.out)->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Per-domain test accuracy");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--corpus", ev.corpus)->required();
  eval_cmd->add_option("--out", ev.out, "Directory for eval_report.json");

  AttackArgs at;
  auto* attack_cmd = app.add_subcommand("attack", "Cross-domain membership inference");
  attack_cmd->add_option("--checkpoint", at.checkpoint)->required();
  attack_cmd->add_option("--corpus", at.corpus)->required();
  attack_cmd->add_option("--attacker", at.attacker);
  attack_cmd->add_option("--target", at.target);
  attack_cmd->add_flag("--all-pairs", at.all_pairs);
  attack_cmd->add_option("--out", at.out, "Output directory");

  SurgeryArgs ab;
  auto* ablate_cmd = app.add_subcommand("ablate", "Remove shared prompts or experts");
  ablate_cmd->add_option("--checkpoint", ab.checkpoint)->required();
  ablate_cmd->add_option("--surgery", ab.surgery)->required();
  ablate_cmd->add_option("--out", ab.out)->required();

  SurgeryArgs ex;
  auto* export_cmd = app.add_subcommand("export", "Deployable single-domain model");
  export_cmd->add_option("--checkpoint", ex.checkpoint)->required();
  export_cmd->add_option("--domain", ex.domain)->required();
  export_cmd->add_option("--out", ex.out)->required();

  DiffArgs df;
  auto* diff_cmd = app.add_subcommand("diff", "Per-token prediction diff");
  diff_cmd->add_option("--a", df.a, "Model A checkpoint")->required();
  diff_cmd->add_option("--b", df.b, "Model B checkpoint")->required();
  diff_cmd->add_option("--corpus", df.corpus)->required();
  diff_cmd->add_option("--doc", df.doc, "Document id")->required();
  diff_cmd->add_option("--html", df.html, "Also write an HTML page");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  int threads = g.threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("NOE_THREADS")) threads = std::atoi(env);
  }
  noe_set_threads(threads);

  try {
    if (*gen_cmd) GenCorpus(gen, g);
    if (*pre_cmd) Pretrain(pre, g);
    if (*cal_cmd) Calibrate(cal);
    if (*train_cmd) Train(tr, g);
    if (*eval_cmd) Eval(ev);
    if (*attack_cmd) Attack(at);
    if (*ablate_cmd) Ablate(ab);
    if (*export_cmd) Export(ex);
    if (*diff_cmd) Diff(df);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.status == NOE_ERR_VALIDATION ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
