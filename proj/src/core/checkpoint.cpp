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


#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "core/common.hpp"

namespace noe::model {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'N', 'O', 'E', '1'};

template <typename Int>
void Put(std::string& out, Int v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path)
      : bytes_(bytes), path_(path) {}

  bool AtEnd() const { return pos_ == bytes_.size(); }

  template <typename Int>
  Int Get() {
    Int v;
    std::memcpy(&v, Take(sizeof(v)), sizeof(v));
    return v;
  }

  std::string GetString(uint64_t n) { return std::string(Take(n), n); }

  const char* Take(uint64_t n) {
    if (n > bytes_.size() - pos_) {
      throw RuntimeFailure(path_ + ": truncated checkpoint at byte " +
                           std::to_string(pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  const std::string& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

struct Section {
  std::vector<uint64_t> dims;
  Matrix<float> data;
};

std::map<std::string, Section> ReadSections(Reader& r, const std::string& path,
                                            std::vector<std::string>* order) {
  std::map<std::string, Section> out;
  while (!r.AtEnd()) {
    const auto name = r.GetString(r.Get<uint64_t>());
    const auto rank = r.Get<uint64_t>();
    if (rank < 1 || rank > 2) {
      throw RuntimeFailure(path + ": section " + name + " has rank " +
                           std::to_string(rank));
    }
    Section s;
    uint64_t count = 1;
    for (uint64_t i = 0; i < rank; ++i) {
      s.dims.push_back(r.Get<uint64_t>());
      count *= s.dims.back();
    }
    const auto rows = static_cast<Eigen::Index>(rank == 2 ? s.dims[0] : 1);
    const auto cols = static_cast<Eigen::Index>(s.dims.back());
    s.data.resize(rows, cols);
    std::memcpy(s.data.data(), r.Take(count * sizeof(float)),
                count * sizeof(float));
    if (order) order->push_back(name);
    if (!out.emplace(name, std::move(s)).second) {
      throw RuntimeFailure(path + ": duplicate section " + name);
    }
  }
  return out;
}

nlohmann::json ReadHeader(Reader& r, const std::string& path) {
  if (std::memcmp(r.Take(4), kMagic, 4) != 0) {
    throw RuntimeFailure(path + ": not a checkpoint (bad magic)");
  }
  const auto version = r.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw RuntimeFailure(path + ": unsupported checkpoint version " +
                         std::to_string(version));
  }
  try {
    return nlohmann::json::parse(r.GetString(r.Get<uint64_t>()));
  } catch (const nlohmann::json::exception& e) {
    throw RuntimeFailure(path + ": corrupt metadata: " + e.what());
  }
}

}  // namespace

void SaveCheckpoint(const std::string& path, const ModelParams<float>& params,
                    nlohmann::json metadata) {
  metadata["model"] = ToJson(params.config);
  std::string out(kMagic, 4);
  Put<uint32_t>(out, kCheckpointVersion);
  const std::string meta = metadata.dump();
  Put<uint64_t>(out, meta.size());
  out += meta;
  ForEachTensor(params, PresentSelection(params),
                [&](const std::string& name, const Matrix<float>& m) {
                  Put<uint64_t>(out, name.size());
                  out += name;
                  Put<uint64_t>(out, 2);
                  Put<uint64_t>(out, static_cast<uint64_t>(m.rows()));
                  Put<uint64_t>(out, static_cast<uint64_t>(m.cols()));
                  out.append(reinterpret_cast<const char*>(m.data()),
                             sizeof(float) * static_cast<std::size_t>(m.size()));
                });
  WriteFileAtomic(path, out);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  const std::string bytes = ReadFile(path);
  Reader r(bytes, path);
  Checkpoint ck;
  ck.metadata = ReadHeader(r, path);
  if (!ck.metadata.contains("model")) {
    throw RuntimeFailure(path + ": metadata lacks the model configuration");
  }
  ck.params.config = ModelConfigFromJson(ck.metadata.at("model"), "model");
  auto sections = ReadSections(r, path, nullptr);
  const ModelConfig& c = ck.params.config;

  // Build an empty parameter shell with the groups found in the file, then
  // fill it through the canonical visitor so names and shapes are checked.
  ModelParams<float>& p = ck.params;
  p.backbone.layers.resize(static_cast<std::size_t>(c.n_layers));
  const bool has_prompts = sections.count("prompts/P") > 0;
  if (has_prompts) p.prompts.emplace();
  int experts = 0;
  while (sections.count("expert/" + std::to_string(experts) + "/0/Wi/A")) {
    ++experts;
  }
  if (experts > 0 && experts != c.num_domains) {
    throw RuntimeFailure(path + ": found " + std::to_string(experts) +
                         " expert stacks for K=" + std::to_string(c.num_domains));
  }
  auto stack = [&] {
    return AdapterStack<float>(static_cast<std::size_t>(c.n_layers));
  };
  for (int k = 0; k < experts; ++k) p.experts.push_back(stack());
  if (sections.count("common/0/Wi/A")) p.common = stack();

  std::size_t used = 0;
  ForEachTensor(p, PresentSelection(p),
                [&](const std::string& name, Matrix<float>& m) {
                  auto it = sections.find(name);
                  if (it == sections.end()) {
                    throw RuntimeFailure(path + ": missing section " + name);
                  }
                  m = std::move(it->second.data);
                  ++used;
                });
  if (used != sections.size()) {
    throw RuntimeFailure(path + ": unexpected sections in checkpoint");
  }
  // Shape check against the configuration.
  const auto& bb = p.backbone;
  auto expect = [&](const Matrix<float>& m, Eigen::Index rows,
                    Eigen::Index cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
      throw RuntimeFailure(path + ": " + what + " has shape " +
                           std::to_string(m.rows()) + "x" +
                           std::to_string(m.cols()));
    }
  };
  expect(bb.tok_emb, c.vocab_size, c.d_model, "backbone/tok_emb");
  expect(bb.pos_emb, c.max_sequence(), c.d_model, "backbone/pos_emb");
  expect(bb.w_out, c.d_model, c.vocab_size, "backbone/w_out");
  for (const auto& w : bb.layers) {
    expect(w.wi, c.d_model, c.d_ff, "backbone Wi");
    expect(w.wo, c.d_ff, c.d_model, "backbone Wo");
  }
  if (p.prompts) expect(*p.prompts, c.n_pt, c.d_model, "prompts/P");
  return ck;
}

std::vector<std::string> ListSections(const std::string& path) {
  const std::string bytes = ReadFile(path);
  Reader r(bytes, path);
  ReadHeader(r, path);
  std::vector<std::string> order;
  ReadSections(r, path, &order);
  return order;
}

}  // namespace noe::model
