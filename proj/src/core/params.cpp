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

#include "core/params.hpp"

#include <cmath>
#include <cstring>

namespace noe::model {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kAdapterInitStd = 0.02;

template <typename T>
Matrix<T> Gaussian(int rows, int cols, double stddev, Rng& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(n(rng));
  }
  return m;
}

template <typename T>
Matrix<T> Constant(int rows, int cols, double v) {
  return Matrix<T>::Constant(rows, cols, static_cast<T>(v));
}

}  // namespace

template <typename T>
Backbone<T> InitBackbone(const ModelConfig& c, Rng& rng) {
  c.Validate();
  Backbone<T> b;
  const int d = c.d_model;
  const double proj_std = kInitStd / std::sqrt(2.0 * c.n_layers);
  b.tok_emb = Gaussian<T>(c.vocab_size, d, kInitStd, rng);
  b.pos_emb = Gaussian<T>(c.max_sequence(), d, kInitStd, rng);
  for (int l = 0; l < c.n_layers; ++l) {
    LayerWeights<T> w;
    w.ln1_g = Constant<T>(1, d, 1.0);
    w.ln1_b = Constant<T>(1, d, 0.0);
    w.wq = Gaussian<T>(d, d, kInitStd, rng);
    w.wk = Gaussian<T>(d, d, kInitStd, rng);
    w.wv = Gaussian<T>(d, d, kInitStd, rng);
    w.wproj = Gaussian<T>(d, d, proj_std, rng);
    w.ln2_g = Constant<T>(1, d, 1.0);
    w.ln2_b = Constant<T>(1, d, 0.0);
    w.wi = Gaussian<T>(d, c.d_ff, kInitStd, rng);
    w.wo = Gaussian<T>(c.d_ff, d, proj_std, rng);
    b.layers.push_back(std::move(w));
  }
  b.lnf_g = Constant<T>(1, d, 1.0);
  b.lnf_b = Constant<T>(1, d, 0.0);
  b.w_out = Gaussian<T>(d, c.vocab_size, kInitStd, rng);
  return b;
}

template <typename T>
Matrix<T> InitPrompts(const ModelConfig& c, const Backbone<T>& backbone,
                      Rng& rng) {
  // Start from embeddings of randomly drawn vocabulary entries.
  Matrix<T> p(c.n_pt, c.d_model);
  std::uniform_int_distribution<int> tok(0, c.vocab_size - 1);
  for (int i = 0; i < c.n_pt; ++i) p.row(i) = backbone.tok_emb.row(tok(rng));
  return p;
}

template <typename T>
AdapterStack<T> InitAdapters(const ModelConfig& c, int rank, Rng& rng) {
  Require(rank >= 1, "adapter rank must be >= 1");
  AdapterStack<T> stack;
  for (int l = 0; l < c.n_layers; ++l) {
    LayerAdapters<T> la;
    la.wi.a = Gaussian<T>(rank, c.d_ff, kAdapterInitStd, rng);
    la.wi.b = Matrix<T>::Zero(c.d_model, rank);
    la.wo.a = Gaussian<T>(rank, c.d_model, kAdapterInitStd, rng);
    la.wo.b = Matrix<T>::Zero(c.d_ff, rank);
    stack.push_back(std::move(la));
  }
  return stack;
}

Selection FullSelection(bool has_prompts, bool has_experts, bool has_common) {
  Selection s;
  s.backbone = true;
  s.prompts = has_prompts;
  s.common = has_common;
  s.experts = has_experts ? Selection::kAllExperts : Selection::kNoExperts;
  return s;
}

template <typename T>
std::size_t CountParameters(const ModelParams<T>& p, const Selection& sel) {
  std::size_t n = 0;
  ForEachTensor(p, sel, [&](const std::string&, const Matrix<T>& m) {
    n += static_cast<std::size_t>(m.size());
  });
  return n;
}

template <typename T>
std::vector<T> Gather(const ModelParams<T>& p, const Selection& sel) {
  std::vector<T> flat;
  flat.reserve(CountParameters(p, sel));
  ForEachTensor(p, sel, [&](const std::string&, const Matrix<T>& m) {
    flat.insert(flat.end(), m.data(), m.data() + m.size());
  });
  return flat;
}

template <typename T>
void Scatter(ModelParams<T>& p, const Selection& sel,
             const std::vector<T>& flat) {
  std::size_t off = 0;
  ForEachTensor(p, sel, [&](const std::string& name, Matrix<T>& m) {
    if (off + static_cast<std::size_t>(m.size()) > flat.size()) {
      throw ValidationError("scatter: flat vector too short at " + name);
    }
    std::memcpy(m.data(), flat.data() + off, sizeof(T) * m.size());
    off += static_cast<std::size_t>(m.size());
  });
  if (off != flat.size()) throw ValidationError("scatter: size mismatch");
}

template <typename To, typename From>
ModelParams<To> CastParams(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.config = p.config;
  auto cast = [](const Matrix<From>& m) -> Matrix<To> {
    return m.template cast<To>();
  };
  out.backbone.tok_emb = cast(p.backbone.tok_emb);
  out.backbone.pos_emb = cast(p.backbone.pos_emb);
  for (const auto& w : p.backbone.layers) {
    out.backbone.layers.push_back({cast(w.ln1_g), cast(w.ln1_b), cast(w.wq),
                                   cast(w.wk), cast(w.wv), cast(w.wproj),
                                   cast(w.ln2_g), cast(w.ln2_b), cast(w.wi),
                                   cast(w.wo)});
  }
  out.backbone.lnf_g = cast(p.backbone.lnf_g);
  out.backbone.lnf_b = cast(p.backbone.lnf_b);
  out.backbone.w_out = cast(p.backbone.w_out);
  if (p.prompts) out.prompts = cast(*p.prompts);
  auto cast_stack = [&](const AdapterStack<From>& s) {
    AdapterStack<To> o;
    for (const auto& la : s) {
      o.push_back({{cast(la.wi.a), cast(la.wi.b)},
                   {cast(la.wo.a), cast(la.wo.b)}});
    }
    return o;
  };
  for (const auto& s : p.experts) out.experts.push_back(cast_stack(s));
  if (p.common) out.common = cast_stack(*p.common);
  return out;
}

template <typename T>
std::string HashSelection(const ModelParams<T>& p, const Selection& sel) {
  std::string bytes;
  ForEachTensor(p, sel, [&](const std::string& name, const Matrix<T>& m) {
    bytes += name;
    bytes.append(reinterpret_cast<const char*>(m.data()), sizeof(T) * m.size());
  });
  return Sha256Hex(bytes.data(), bytes.size());
}

#define NOE_INSTANTIATE(T)                                                   \
  template Backbone<T> InitBackbone<T>(const ModelConfig&, Rng&);            \
  template Matrix<T> InitPrompts<T>(const ModelConfig&, const Backbone<T>&,  \
                                    Rng&);                                   \
  template AdapterStack<T> InitAdapters<T>(const ModelConfig&, int, Rng&);   \
  template std::size_t CountParameters<T>(const ModelParams<T>&,             \
                                          const Selection&);                 \
  template std::vector<T> Gather<T>(const ModelParams<T>&, const Selection&); \
  template void Scatter<T>(ModelParams<T>&, const Selection&,                \
                           const std::vector<T>&);                           \
  template std::string HashSelection<T>(const ModelParams<T>&,               \
                                        const Selection&);

NOE_INSTANTIATE(float)
NOE_INSTANTIATE(double)
#undef NOE_INSTANTIATE

template ModelParams<double> CastParams<double, float>(const ModelParams<float>&);
template ModelParams<float> CastParams<float, double>(const ModelParams<double>&);
template ModelParams<float> CastParams<float, float>(const ModelParams<float>&);
template ModelParams<double> CastParams<double, double>(const ModelParams<double>&);

}  // namespace noe::model
