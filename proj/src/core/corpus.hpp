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

// Multi-domain document corpora: synthetic generation, JSON Lines storage,
// train/test splitting and per-epoch block sampling.

#ifndef NOE_CORE_CORPUS_HPP_
#define NOE_CORE_CORPUS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace noe::corpus {

using TokenId = int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kOpen = 1;
inline constexpr TokenId kClose = 2;
inline constexpr TokenId kFirstMarker = 4;
inline constexpr int kNumDialects = 4;
inline constexpr TokenId kFirstKeyword = 8;

enum class Split { kTrain, kTest };

struct Document {
  int64_t id = 0;
  int domain = 0;
  Split split = Split::kTrain;
  std::vector<TokenId> tokens;
};

class Corpus {
 public:
  Corpus() = default;
  Corpus(int num_domains, int vocab_size, std::vector<Document> documents,
         nlohmann::json generator = nullptr);

  int num_domains() const { return num_domains_; }
  int vocab_size() const { return vocab_size_; }
  const std::vector<Document>& documents() const { return documents_; }
  const nlohmann::json& generator() const { return generator_; }

  // Documents of `domain` with the given split, in storage order. domain < 0
  // selects every domain.
  std::vector<const Document*> Select(Split split, int domain = -1) const;
  const Document& ById(int64_t id) const;

  std::size_t CountTrain() const;
  std::size_t Count(Split split, int domain) const;

  // Throws ValidationError on out-of-range tokens/domains or duplicate ids.
  void Validate() const;

 private:
  int num_domains_ = 0;
  int vocab_size_ = 0;
  std::vector<Document> documents_;
  nlohmann::json generator_;
};

struct SyntheticSpec {
  int num_domains = 3;
  std::vector<int> docs_per_domain = {2000, 400, 80};
  int shared_keyword_count = 24;
  int private_keyword_count = 24;
  int nesting_depth = 2;
  uint64_t seed = 0;
  int vocab_size = 128;
  int min_doc_tokens = 40;
  int max_doc_tokens = 96;
  // Probability that a fresh keyword comes from the shared pool.
  double shared_mix = 0.5;
};

nlohmann::json ToJson(const SyntheticSpec& spec);
SyntheticSpec SyntheticSpecFromJson(const nlohmann::json& j);

// Bracketed keyword programs. Shared keywords follow one successor rule that
// every private domain has in common; private keywords follow a per-domain
// rule plus per-document identifier pairs. All documents start as train.
Corpus GenerateSyntheticCorpus(const SyntheticSpec& spec);

// Public pretraining corpus over the same vocabulary. Every document opens
// with a dialect marker that selects its shared-keyword successor rule;
// private-domain documents carry no marker. Single domain, all train.
Corpus GeneratePublicCorpus(const SyntheticSpec& spec, int num_docs,
                            int max_doc_tokens);

Corpus SplitTrainTest(const Corpus& corpus, double test_fraction,
                      uint64_t seed);

struct TokenBlock {
  std::vector<TokenId> tokens;
  std::vector<uint8_t> pad_mask;  // 1 = real token
  int domain = 0;
  int64_t source_doc_id = 0;

  int RealTokens() const;
};

// One block per training document, random window for long documents, seeded
// shuffle across domains.
std::vector<TokenBlock> SampleEpochBlocks(const Corpus& corpus, int length,
                                          uint64_t seed, int epoch_index);

// Deterministic block from the first `length` tokens of a document.
TokenBlock FirstWindow(const Document& doc, int length);
TokenBlock MakeBlock(std::span<const TokenId> tokens, int length, int domain,
                     int64_t source_doc_id);

// JSON Lines, one document per line.
void SaveJsonl(const Corpus& corpus, const std::string& path);
Corpus LoadJsonl(const std::string& path, int vocab_size = -1);

nlohmann::json Manifest(const Corpus& corpus);

}  // namespace noe::corpus

#endif  // NOE_CORE_CORPUS_HPP_
