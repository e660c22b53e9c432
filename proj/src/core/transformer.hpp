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

// Decoder-only transformer with a prompt prefix and domain-routed low-rank
// adapters on both FFN matrices of every block. Forward and backward are
// written out by hand; the backward pass only materializes weight gradients
// for the requested parameter groups.

#ifndef NOE_CORE_TRANSFORMER_HPP_
#define NOE_CORE_TRANSFORMER_HPP_

#include <span>
#include <string>
#include <type_traits>
#include <unordered_map>
#include <vector>

#include "core/corpus.hpp"
#include "core/params.hpp"

namespace noe::model {

using corpus::TokenBlock;
using corpus::TokenId;

// Logits (L x V) for the real positions of `block`. When experts are present
// only the adapter of `domain` is applied.
template <typename T>
Matrix<T> Forward(const ModelParams<T>& p, int domain, const TokenBlock& block);

// Mean next-token cross-entropy over targets 2..L that are real tokens.
template <typename T>
T Loss(const Matrix<T>& logits, const TokenBlock& block);

// Average natural-log likelihood of tokens 2..n given their prefixes.
template <typename T>
double SequenceLogLikelihood(const ModelParams<T>& p, int domain,
                             std::span<const TokenId> tokens);

// W + alpha * B A (+ alpha * Bc Ac).
template <typename T>
Matrix<T> EffectiveWeight(const Matrix<T>& w,
                          const std::type_identity_t<LoraPair<T>>* expert,
                          const std::type_identity_t<LoraPair<T>>* common,
                          double alpha);

// Dense single-domain model: FFN matrices replaced by their effective
// weights, adapters dropped, prompts kept as the fixed prefix.
template <typename T>
ModelParams<T> MergeForDeployment(const ModelParams<T>& p, int domain);

// Offsets of each selected tensor inside a flat gradient vector.
class GradLayout {
 public:
  template <typename T>
  GradLayout(const ModelParams<T>& p, const Selection& sel);

  const Selection& selection() const { return sel_; }
  std::size_t size() const { return size_; }
  // Offset of `name`, or -1 when not selected.
  std::ptrdiff_t Offset(const std::string& name) const;

 private:
  Selection sel_;
  std::size_t size_ = 0;
  std::unordered_map<std::string, std::ptrdiff_t> offsets_;
};

// Loss of one example (routed by block.domain) and its gradient with
// respect to the layout's tensors, written into `grad` (size layout.size()).
template <typename T>
T LossAndGradient(const ModelParams<T>& p, const GradLayout& layout,
                  const TokenBlock& block, std::span<T> grad);

struct GradOptions {
  // The backbone is frozen during prompt and expert training; only the
  // full-model baselines may ask for its gradient.
  bool allow_backbone = false;
};

template <typename T>
struct PerSampleGradients {
  std::vector<std::vector<T>> grads;  // one flat record per example
  std::vector<T> losses;
};

template <typename T>
PerSampleGradients<T> PerSampleGrads(const ModelParams<T>& p,
                                     const Selection& sel,
                                     std::span<const TokenBlock> batch,
                                     GradOptions options = {});

}  // namespace noe::model

#endif  // NOE_CORE_TRANSFORMER_HPP_
