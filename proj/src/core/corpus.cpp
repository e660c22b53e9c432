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

#include "core/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "core/common.hpp"

namespace noe::corpus {
namespace {

constexpr double kRuleProbability = 0.8;
constexpr double kPairProbability = 0.75;
constexpr double kLocalIdentifierProbability = 0.6;
constexpr double kNestProbability = 0.25;
constexpr int kIdentifiersPerDocument = 3;

std::vector<TokenId> Permutation(TokenId first, int count, Rng& rng) {
  std::vector<TokenId> perm(static_cast<std::size_t>(count));
  std::iota(perm.begin(), perm.end(), first);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

void ValidateSpec(const SyntheticSpec& spec) {
  Require(spec.num_domains >= 2, "synthetic spec: K must be >= 2");
  Require(static_cast<int>(spec.docs_per_domain.size()) == spec.num_domains,
          "synthetic spec: docs_per_domain must list one count per domain");
  for (int n : spec.docs_per_domain) {
    Require(n > 0, "synthetic spec: docs_per_domain must be positive");
  }
  Require(spec.private_keyword_count > 0,
          "synthetic spec: private keyword pool is empty");
  Require(spec.shared_keyword_count >= 0,
          "synthetic spec: shared_keyword_count must be >= 0");
  Require(spec.nesting_depth >= 0, "synthetic spec: nesting_depth < 0");
  Require(spec.min_doc_tokens >= 2 &&
              spec.max_doc_tokens >= spec.min_doc_tokens,
          "synthetic spec: invalid document length range");
  Require(spec.shared_mix >= 0.0 && spec.shared_mix <= 1.0,
          "synthetic spec: shared_mix outside [0, 1]");
  const int needed = kFirstKeyword + spec.shared_keyword_count +
                     spec.num_domains * spec.private_keyword_count;
  Require(needed <= spec.vocab_size,
          "synthetic spec: keyword pools do not fit the vocabulary (need " +
              std::to_string(needed) + ")");
}

// Token-level grammar shared by the private and public generators.
struct Grammar {
  const SyntheticSpec* spec = nullptr;
  TokenId shared_begin = 0;
  std::vector<TokenId> shared_successor;  // indexed by token - shared_begin
  // Fresh private draws come from here (uniform) unless an identifier fires.
  TokenId private_begin = 0;
  int private_count = 0;
  std::vector<TokenId> private_successor;  // empty = no private rule
  std::unordered_map<TokenId, TokenId> identifier_pairs;
  std::vector<TokenId> identifiers;

  bool IsShared(TokenId t) const {
    return t >= shared_begin &&
           t < shared_begin + static_cast<TokenId>(shared_successor.size());
  }
  bool IsPrivate(TokenId t) const {
    return t >= private_begin && t < private_begin + private_count;
  }

  TokenId Fresh(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool use_shared =
        !shared_successor.empty() && u(rng) < spec->shared_mix;
    if (use_shared) {
      std::uniform_int_distribution<int> pick(
          0, static_cast<int>(shared_successor.size()) - 1);
      return shared_begin + pick(rng);
    }
    if (!identifiers.empty() && u(rng) < kLocalIdentifierProbability) {
      std::uniform_int_distribution<std::size_t> pick(0,
                                                      identifiers.size() - 1);
      return identifiers[pick(rng)];
    }
    std::uniform_int_distribution<int> pick(0, private_count - 1);
    return private_begin + pick(rng);
  }

  TokenId Next(TokenId prev, Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (IsShared(prev)) {
      if (u(rng) < kRuleProbability) {
        return shared_successor[static_cast<std::size_t>(prev - shared_begin)];
      }
    } else if (IsPrivate(prev)) {
      if (auto it = identifier_pairs.find(prev); it != identifier_pairs.end()) {
        if (u(rng) < kPairProbability) return it->second;
      } else if (!private_successor.empty() && u(rng) < kRuleProbability) {
        return private_successor[static_cast<std::size_t>(prev -
                                                          private_begin)];
      }
    }
    return Fresh(rng);
  }

  void Statement(int depth, std::vector<TokenId>& out, TokenId& prev,
                 Rng& rng) const {
    std::uniform_int_distribution<int> items(2, 4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    out.push_back(kOpen);
    prev = kOpen;
    const int n = items(rng);
    for (int i = 0; i < n; ++i) {
      if (depth < spec->nesting_depth && u(rng) < kNestProbability) {
        Statement(depth + 1, out, prev, rng);
      } else {
        prev = Next(prev, rng);
        out.push_back(prev);
      }
    }
    out.push_back(kClose);
    prev = kClose;
  }

  std::vector<TokenId> Document(int target, Rng& rng) const {
    std::vector<TokenId> out;
    TokenId prev = kClose;
    while (static_cast<int>(out.size()) < target) Statement(0, out, prev, rng);
    out.resize(static_cast<std::size_t>(target));
    return out;
  }
};

struct PoolLayout {
  TokenId shared_begin;
  TokenId private_begin0;
  std::vector<std::vector<TokenId>> dialect_successors;
};

PoolLayout MakeLayout(const SyntheticSpec& spec) {
  PoolLayout layout;
  layout.shared_begin = kFirstKeyword;
  layout.private_begin0 = kFirstKeyword + spec.shared_keyword_count;
  Rng rng = MakeRng(spec.seed, kStreamCorpus);
  for (int d = 0; d < kNumDialects; ++d) {
    layout.dialect_successors.push_back(
        Permutation(layout.shared_begin, spec.shared_keyword_count, rng));
  }
  return layout;
}

}  // namespace

Corpus::Corpus(int num_domains, int vocab_size, std::vector<Document> documents,
               nlohmann::json generator)
    : num_domains_(num_domains),
      vocab_size_(vocab_size),
      documents_(std::move(documents)),
      generator_(std::move(generator)) {}

std::vector<const Document*> Corpus::Select(Split split, int domain) const {
  std::vector<const Document*> out;
  for (const auto& d : documents_) {
    if (d.split == split && (domain < 0 || d.domain == domain)) {
      out.push_back(&d);
    }
  }
  return out;
}

const Document& Corpus::ById(int64_t id) const {
  for (const auto& d : documents_) {
    if (d.id == id) return d;
  }
  Fail("no document with id " + std::to_string(id));
}

std::size_t Corpus::CountTrain() const {
  return static_cast<std::size_t>(
      std::count_if(documents_.begin(), documents_.end(),
                    [](const Document& d) { return d.split == Split::kTrain; }));
}

std::size_t Corpus::Count(Split split, int domain) const {
  return static_cast<std::size_t>(std::count_if(
      documents_.begin(), documents_.end(), [&](const Document& d) {
        return d.split == split && d.domain == domain;
      }));
}

void Corpus::Validate() const {
  Require(num_domains_ >= 1, "corpus: no domains");
  Require(vocab_size_ >= 2, "corpus: vocabulary too small");
  std::unordered_set<int64_t> ids;
  for (const auto& d : documents_) {
    Require(ids.insert(d.id).second,
            "corpus: duplicate document id " + std::to_string(d.id));
    Require(d.domain >= 0 && d.domain < num_domains_,
            "corpus: document " + std::to_string(d.id) + " has domain " +
                std::to_string(d.domain) + " outside [0, K)");
    Require(!d.tokens.empty(),
            "corpus: document " + std::to_string(d.id) + " is empty");
    for (TokenId t : d.tokens) {
      Require(t >= 0 && t < vocab_size_,
              "corpus: document " + std::to_string(d.id) + " has token " +
                  std::to_string(t) + " outside [0, V)");
    }
  }
}

nlohmann::json ToJson(const SyntheticSpec& spec) {
  return {{"K", spec.num_domains},
          {"docs_per_domain", spec.docs_per_domain},
          {"shared_keyword_count", spec.shared_keyword_count},
          {"private_keyword_count", spec.private_keyword_count},
          {"nesting_depth", spec.nesting_depth},
          {"seed", spec.seed},
          {"vocab_size", spec.vocab_size},
          {"min_doc_tokens", spec.min_doc_tokens},
          {"max_doc_tokens", spec.max_doc_tokens},
          {"shared_mix", spec.shared_mix}};
}

SyntheticSpec SyntheticSpecFromJson(const nlohmann::json& j) {
  Require(j.is_object(), "spec: expected an object");
  for (const auto& [key, _] : j.items()) {
    static const char* kKeys[] = {"K", "docs_per_domain", "shared_keyword_count",
                                  "private_keyword_count", "nesting_depth",
                                  "seed", "vocab_size", "min_doc_tokens",
                                  "max_doc_tokens", "shared_mix"};
    Require(std::find(std::begin(kKeys), std::end(kKeys), key) != std::end(kKeys),
            "spec." + key + ": unknown key");
  }
  SyntheticSpec s;
  s.num_domains = j.value("K", s.num_domains);
  s.docs_per_domain = j.value("docs_per_domain", s.docs_per_domain);
  s.shared_keyword_count = j.value("shared_keyword_count", s.shared_keyword_count);
  s.private_keyword_count =
      j.value("private_keyword_count", s.private_keyword_count);
  s.nesting_depth = j.value("nesting_depth", s.nesting_depth);
  s.seed = j.value("seed", s.seed);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  s.min_doc_tokens = j.value("min_doc_tokens", s.min_doc_tokens);
  s.max_doc_tokens = j.value("max_doc_tokens", s.max_doc_tokens);
  s.shared_mix = j.value("shared_mix", s.shared_mix);
  return s;
}

Corpus GenerateSyntheticCorpus(const SyntheticSpec& spec) {
  ValidateSpec(spec);
  const PoolLayout layout = MakeLayout(spec);
  Rng rule_rng = MakeRng(spec.seed, kStreamCorpus + 100);
  std::vector<Document> docs;
  int64_t next_id = 0;
  for (int k = 0; k < spec.num_domains; ++k) {
    Grammar g;
    g.spec = &spec;
    g.shared_begin = layout.shared_begin;
    // Every private domain speaks dialect 0 for shared keywords.
    g.shared_successor = layout.dialect_successors[0];
    g.private_begin = layout.private_begin0 + k * spec.private_keyword_count;
    g.private_count = spec.private_keyword_count;
    g.private_successor =
        Permutation(g.private_begin, spec.private_keyword_count, rule_rng);
    Rng rng = MakeRng(MixSeed(spec.seed, static_cast<uint64_t>(k)),
                      kStreamCorpus);
    std::uniform_int_distribution<int> len(spec.min_doc_tokens,
                                           spec.max_doc_tokens);
    std::uniform_int_distribution<int> pick(0, g.private_count - 1);
    for (int i = 0; i < spec.docs_per_domain[static_cast<std::size_t>(k)];
         ++i) {
      g.identifiers.clear();
      g.identifier_pairs.clear();
      while (static_cast<int>(g.identifiers.size()) <
             std::min(kIdentifiersPerDocument, g.private_count)) {
        const TokenId t = g.private_begin + pick(rng);
        if (std::find(g.identifiers.begin(), g.identifiers.end(), t) ==
            g.identifiers.end()) {
          g.identifiers.push_back(t);
        }
      }
      for (TokenId t : g.identifiers) {
        g.identifier_pairs[t] = g.private_begin + pick(rng);
      }
      Document d;
      d.id = next_id++;
      d.domain = k;
      d.split = Split::kTrain;
      d.tokens = g.Document(len(rng), rng);
      docs.push_back(std::move(d));
    }
  }
  return Corpus(spec.num_domains, spec.vocab_size, std::move(docs),
                ToJson(spec));
}

Corpus GeneratePublicCorpus(const SyntheticSpec& spec, int num_docs,
                            int max_doc_tokens) {
  ValidateSpec(spec);
  Require(num_docs > 0, "public corpus: num_docs must be positive");
  Require(max_doc_tokens >= 2, "public corpus: max_doc_tokens < 2");
  const PoolLayout layout = MakeLayout(spec);
  Rng rng = MakeRng(spec.seed, kStreamPublic);
  std::uniform_int_distribution<int> dialect(0, kNumDialects - 1);
  const int max_len = std::min(max_doc_tokens, spec.max_doc_tokens);
  const int min_len = std::min(spec.min_doc_tokens, max_len);
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::vector<Document> docs;
  for (int i = 0; i < num_docs; ++i) {
    const int d = dialect(rng);
    Grammar g;
    g.spec = &spec;
    g.shared_begin = layout.shared_begin;
    g.shared_successor = layout.dialect_successors[static_cast<std::size_t>(d)];
    // Public text uses every private keyword, with no successor structure.
    g.private_begin = layout.private_begin0;
    g.private_count = spec.num_domains * spec.private_keyword_count;
    Document doc;
    doc.id = i;
    doc.domain = 0;
    doc.tokens.push_back(kFirstMarker + d);
    std::vector<TokenId> body = g.Document(len(rng) - 1, rng);
    doc.tokens.insert(doc.tokens.end(), body.begin(), body.end());
    docs.push_back(std::move(doc));
  }
  nlohmann::json gen = ToJson(spec);
  gen["public_docs"] = num_docs;
  return Corpus(1, spec.vocab_size, std::move(docs), std::move(gen));
}

Corpus SplitTrainTest(const Corpus& corpus, double test_fraction,
                      uint64_t seed) {
  Require(test_fraction > 0.0 && test_fraction < 1.0,
          "split: test_fraction must lie in (0, 1)");
  std::vector<Document> docs = corpus.documents();
  Rng rng = MakeRng(seed, kStreamSplit);
  for (int k = 0; k < corpus.num_domains(); ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (docs[i].domain == k) idx.push_back(i);
    }
    Require(idx.size() >= 2, "split: domain " + std::to_string(k) +
                                 " has fewer than 2 documents");
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      docs[idx[j]].split = j < n_test ? Split::kTest : Split::kTrain;
    }
  }
  nlohmann::json gen = corpus.generator();
  if (gen.is_null()) gen = nlohmann::json::object();
  gen["split"] = {{"test_fraction", test_fraction}, {"seed", seed}};
  return Corpus(corpus.num_domains(), corpus.vocab_size(), std::move(docs),
                std::move(gen));
}

int TokenBlock::RealTokens() const {
  return static_cast<int>(std::count(pad_mask.begin(), pad_mask.end(), 1));
}

TokenBlock MakeBlock(std::span<const TokenId> tokens, int length, int domain,
                     int64_t source_doc_id) {
  TokenBlock b;
  b.tokens.assign(static_cast<std::size_t>(length), kPad);
  b.pad_mask.assign(static_cast<std::size_t>(length), 0);
  const std::size_t n = std::min(tokens.size(), static_cast<std::size_t>(length));
  for (std::size_t i = 0; i < n; ++i) {
    b.tokens[i] = tokens[i];
    b.pad_mask[i] = 1;
  }
  b.domain = domain;
  b.source_doc_id = source_doc_id;
  return b;
}

TokenBlock FirstWindow(const Document& doc, int length) {
  Require(length >= 2, "block length must be >= 2");
  return MakeBlock(doc.tokens, length, doc.domain, doc.id);
}

std::vector<TokenBlock> SampleEpochBlocks(const Corpus& corpus, int length,
                                          uint64_t seed, int epoch_index) {
  Require(length >= 2, "sample_epoch_blocks: L must be >= 2");
  const auto train = corpus.Select(Split::kTrain);
  Require(!train.empty(), "sample_epoch_blocks: corpus has no training documents");
  Rng rng = MakeRng(MixSeed(seed, static_cast<uint64_t>(epoch_index)),
                    kStreamEpoch);
  std::vector<TokenBlock> blocks;
  blocks.reserve(train.size());
  for (const Document* d : train) {
    std::size_t start = 0;
    if (d->tokens.size() > static_cast<std::size_t>(length)) {
      std::uniform_int_distribution<std::size_t> off(
          0, d->tokens.size() - static_cast<std::size_t>(length));
      start = off(rng);
    }
    blocks.push_back(MakeBlock(
        std::span<const TokenId>(d->tokens).subspan(start), length, d->domain,
        d->id));
  }
  std::shuffle(blocks.begin(), blocks.end(), rng);
  return blocks;
}

namespace {

std::string ManifestPathFor(const std::string& jsonl_path) {
  std::filesystem::path p(jsonl_path);
  p.replace_extension(".manifest.json");
  return p.string();
}

}  // namespace

nlohmann::json Manifest(const Corpus& corpus) {
  nlohmann::json counts = nlohmann::json::array();
  for (int k = 0; k < corpus.num_domains(); ++k) {
    counts.push_back({{"domain", k},
                      {"train", corpus.Count(Split::kTrain, k)},
                      {"test", corpus.Count(Split::kTest, k)}});
  }
  nlohmann::json m = {{"K", corpus.num_domains()},
                      {"V", corpus.vocab_size()},
                      {"N_train", corpus.CountTrain()},
                      {"counts", counts},
                      {"generator", corpus.generator()}};
  if (corpus.generator().is_object() && corpus.generator().contains("seed")) {
    m["seed"] = corpus.generator()["seed"];
  }
  return m;
}

void SaveJsonl(const Corpus& corpus, const std::string& path) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    nlohmann::json line = {
        {"id", d.id},
        {"domain", d.domain},
        {"split", d.split == Split::kTrain ? "train" : "test"},
        {"tokens", d.tokens}};
    out += line.dump();
    out += '\n';
  }
  WriteFileAtomic(path, out);
  WriteFileAtomic(ManifestPathFor(path), Manifest(corpus).dump(2) + "\n");
}

Corpus LoadJsonl(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) throw RuntimeFailure("cannot open corpus: " + path);
  std::vector<Document> docs;
  std::string line;
  int max_domain = -1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      Document d;
      d.id = j.at("id").get<int64_t>();
      d.domain = j.at("domain").get<int>();
      const std::string split = j.at("split").get<std::string>();
      Require(split == "train" || split == "test",
              "split must be \"train\" or \"test\"");
      d.split = split == "train" ? Split::kTrain : Split::kTest;
      d.tokens = j.at("tokens").get<std::vector<TokenId>>();
      max_domain = std::max(max_domain, d.domain);
      docs.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      Fail(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      Fail(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  int num_domains = max_domain + 1;
  nlohmann::json generator;
  const std::string manifest_path = ManifestPathFor(path);
  if (std::filesystem::exists(manifest_path)) {
    const nlohmann::json m = nlohmann::json::parse(ReadFile(manifest_path));
    num_domains = m.at("K").get<int>();
    if (vocab_size < 0) vocab_size = m.at("V").get<int>();
    generator = m.value("generator", nlohmann::json());
  }
  if (vocab_size < 0) vocab_size = 128;
  Corpus c(num_domains, vocab_size, std::move(docs), std::move(generator));
  c.Validate();
  return c;
}

}  // namespace noe::corpus
