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

// Partitioned parameter store: frozen backbone, shared prompts, per-domain
// expert adapters and the optional common adapter.

#ifndef NOE_CORE_PARAMS_HPP_
#define NOE_CORE_PARAMS_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "core/common.hpp"
#include "core/model_config.hpp"

namespace noe::model {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct LayerWeights {
  Matrix<T> ln1_g, ln1_b;
  Matrix<T> wq, wk, wv, wproj;
  Matrix<T> ln2_g, ln2_b;
  Matrix<T> wi;  // d_model x d_ff
  Matrix<T> wo;  // d_ff x d_model
};

template <typename T>
struct Backbone {
  Matrix<T> tok_emb;  // V x d_model
  Matrix<T> pos_emb;  // (n_pt + L) x d_model
  std::vector<LayerWeights<T>> layers;
  Matrix<T> lnf_g, lnf_b;
  Matrix<T> w_out;  // d_model x V
};

// Low-rank pair for a p x q matrix: b is p x r, a is r x q.
template <typename T>
struct LoraPair {
  Matrix<T> a, b;
};

template <typename T>
struct LayerAdapters {
  LoraPair<T> wi, wo;
};

template <typename T>
using AdapterStack = std::vector<LayerAdapters<T>>;

template <typename T>
struct ModelParams {
  ModelConfig config;
  Backbone<T> backbone;
  std::optional<Matrix<T>> prompts;         // n_pt x d_model
  std::vector<AdapterStack<T>> experts;     // empty, or one stack per domain
  std::optional<AdapterStack<T>> common;    // rank r_c
};

// Which parameter groups a gradient or update covers.
struct Selection {
  static constexpr int kNoExperts = -2;
  static constexpr int kAllExperts = -1;

  bool backbone = false;
  bool prompts = false;
  bool common = false;
  int experts = kNoExperts;  // kAllExperts or a single domain index

  static Selection Prompts() { return {.prompts = true}; }
  static Selection Common() { return {.common = true}; }
  static Selection Experts(int domain = kAllExperts) {
    return {.experts = domain};
  }
  static Selection Backbone() { return {.backbone = true}; }

  bool Empty() const {
    return !backbone && !prompts && !common && experts == kNoExperts;
  }
};

template <typename T>
Backbone<T> InitBackbone(const ModelConfig& c, Rng& rng);
template <typename T>
Matrix<T> InitPrompts(const ModelConfig& c, const Backbone<T>& backbone,
                      Rng& rng);
// A ~ N(0, 0.02^2), B = 0.
template <typename T>
AdapterStack<T> InitAdapters(const ModelConfig& c, int rank, Rng& rng);

// Visits (name, tensor) in canonical order for the selected groups. Names
// follow the checkpoint section scheme.
template <typename P, typename Fn>
void ForEachTensor(P& params, const Selection& sel, Fn&& fn);

// Every tensor present in `params` (backbone, prompts, experts, common).
Selection FullSelection(bool has_prompts, bool has_experts, bool has_common);
template <typename T>
Selection PresentSelection(const ModelParams<T>& p) {
  return FullSelection(p.prompts.has_value(), !p.experts.empty(),
                       p.common.has_value());
}

template <typename T>
std::size_t CountParameters(const ModelParams<T>& p, const Selection& sel);

// Flat gather/scatter in ForEachTensor order.
template <typename T>
std::vector<T> Gather(const ModelParams<T>& p, const Selection& sel);
template <typename T>
void Scatter(ModelParams<T>& p, const Selection& sel, const std::vector<T>& flat);

template <typename To, typename From>
ModelParams<To> CastParams(const ModelParams<From>& p);

// SHA-256 over the raw bytes of the selected tensors.
template <typename T>
std::string HashSelection(const ModelParams<T>& p, const Selection& sel);

// ---------------------------------------------------------------------------

template <typename P, typename Fn>
void ForEachTensor(P& params, const Selection& sel, Fn&& fn) {
  auto& bb = params.backbone;
  if (sel.backbone) {
    fn(std::string("backbone/tok_emb"), bb.tok_emb);
    fn(std::string("backbone/pos_emb"), bb.pos_emb);
    for (std::size_t l = 0; l < bb.layers.size(); ++l) {
      auto& w = bb.layers[l];
      const std::string p = "backbone/" + std::to_string(l) + "/";
      fn(p + "ln1_g", w.ln1_g);
      fn(p + "ln1_b", w.ln1_b);
      fn(p + "wq", w.wq);
      fn(p + "wk", w.wk);
      fn(p + "wv", w.wv);
      fn(p + "wproj", w.wproj);
      fn(p + "ln2_g", w.ln2_g);
      fn(p + "ln2_b", w.ln2_b);
      fn(p + "Wi", w.wi);
      fn(p + "Wo", w.wo);
    }
    fn(std::string("backbone/lnf_g"), bb.lnf_g);
    fn(std::string("backbone/lnf_b"), bb.lnf_b);
    fn(std::string("backbone/w_out"), bb.w_out);
  }
  if (sel.prompts && params.prompts) fn(std::string("prompts/P"), *params.prompts);
  auto visit_stack = [&](const std::string& prefix, auto& stack) {
    for (std::size_t l = 0; l < stack.size(); ++l) {
      const std::string p = prefix + std::to_string(l) + "/";
      fn(p + "Wi/A", stack[l].wi.a);
      fn(p + "Wi/B", stack[l].wi.b);
      fn(p + "Wo/A", stack[l].wo.a);
      fn(p + "Wo/B", stack[l].wo.b);
    }
  };
  if (sel.experts != Selection::kNoExperts) {
    for (std::size_t k = 0; k < params.experts.size(); ++k) {
      if (sel.experts == Selection::kAllExperts ||
          sel.experts == static_cast<int>(k)) {
        visit_stack("expert/" + std::to_string(k) + "/", params.experts[k]);
      }
    }
  }
  if (sel.common && params.common) visit_stack("common/", *params.common);
}

}  // namespace noe::model

#endif  // NOE_CORE_PARAMS_HPP_
