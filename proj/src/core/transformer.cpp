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

#include "core/transformer.hpp"

#include <cmath>
#include <limits>

namespace noe::model {
namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using MapMatrix = Eigen::Map<Matrix<T>>;

template <typename T>
struct NormCache {
  Matrix<T> xhat;
  Vector<T> rstd;
};

template <typename T>
void LayerNormForward(const Matrix<T>& x, const Matrix<T>& g,
                      const Matrix<T>& b, Matrix<T>& y, NormCache<T>& c) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  c.xhat.resize(n, d);
  c.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).eval();
    const T var = centered.square().mean();
    const T rstd = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    c.rstd(i) = rstd;
    c.xhat.row(i) = centered * rstd;
  }
  y = (c.xhat.array().rowwise() * g.row(0).array()).rowwise() +
      b.row(0).array();
}

// Returns dx; accumulates dg/db when the pointers are non-null.
template <typename T>
Matrix<T> LayerNormBackward(const Matrix<T>& dy, const Matrix<T>& g,
                            const NormCache<T>& c, T* dg, T* db) {
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  if (dg != nullptr) {
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dgm(dg, d);
    dgm += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  }
  if (db != nullptr) {
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> dbm(db, d);
    dbm += dy.colwise().sum();
  }
  Matrix<T> dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
  Matrix<T> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T m1 = dxhat.row(i).mean();
    const T m2 = (dxhat.row(i).array() * c.xhat.row(i).array()).mean();
    dx.row(i) =
        c.rstd(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2);
  }
  return dx;
}

template <typename T>
T Gelu(T x) {
  const T k = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  const T c = static_cast<T>(0.044715);
  return T(0.5) * x * (T(1) + std::tanh(k * (x + c * x * x * x)));
}

template <typename T>
T GeluGrad(T x) {
  const T k = static_cast<T>(0.7978845608028654);
  const T c = static_cast<T>(0.044715);
  const T t = std::tanh(k * (x + c * x * x * x));
  return T(0.5) * (T(1) + t) +
         T(0.5) * x * (T(1) - t * t) * k * (T(1) + T(3) * c * x * x);
}

// Active adapters for one layer.
template <typename T>
struct Route {
  const LayerAdapters<T>* expert = nullptr;
  const LayerAdapters<T>* common = nullptr;
};

template <typename T>
struct LayerCache {
  Matrix<T> x_in;
  NormCache<T> ln1;
  Matrix<T> h, q, k, v, ctx;
  std::vector<Matrix<T>> probs;
  Matrix<T> x_mid;
  NormCache<T> ln2;
  Matrix<T> u;
  Matrix<T> t_wi_expert, t_wi_common;  // u B
  Matrix<T> z, act;
  Matrix<T> t_wo_expert, t_wo_common;  // act B
};

template <typename T>
struct ForwardState {
  int prefix = 0;  // number of prompt rows
  std::vector<LayerCache<T>> layers;
  NormCache<T> lnf;
  Matrix<T> hf;  // final normed hidden, all rows
  Matrix<T> logits;  // real rows only
};

template <typename T>
int ValidateInputs(const ModelParams<T>& p, int domain,
                   const TokenBlock& block) {
  const ModelConfig& c = p.config;
  Require(static_cast<int>(block.tokens.size()) == c.context_length &&
              block.pad_mask.size() == block.tokens.size(),
          "forward: block length must equal the context length L");
  for (TokenId t : block.tokens) {
    Require(t >= 0 && t < c.vocab_size, "forward: token id outside [0, V)");
  }
  Require(static_cast<int>(p.backbone.layers.size()) == c.n_layers &&
              p.backbone.tok_emb.rows() == c.vocab_size &&
              p.backbone.tok_emb.cols() == c.d_model &&
              p.backbone.pos_emb.rows() >= c.max_sequence(),
          "forward: backbone shape does not match the configuration");
  int prefix = 0;
  if (p.prompts) {
    Require(p.prompts->rows() == c.n_pt && p.prompts->cols() == c.d_model,
            "forward: prompt matrix must be n_pt x d_model");
    prefix = c.n_pt;
  }
  if (!p.experts.empty()) {
    Require(static_cast<int>(p.experts.size()) == c.num_domains,
            "forward: expert set must hold one adapter stack per domain");
    Require(domain >= 0 && domain < c.num_domains,
            "forward: domain " + std::to_string(domain) + " outside [0, K)");
  }
  return prefix;
}

template <typename T>
void CheckPair(const LoraPair<T>& pair, Eigen::Index p, Eigen::Index q) {
  Require(pair.b.rows() == p && pair.a.cols() == q &&
              pair.b.cols() == pair.a.rows(),
          "adapter factors do not match the adapted matrix shape");
}

template <typename T>
Route<T> LayerRoute(const ModelParams<T>& p, int domain, std::size_t layer) {
  Route<T> r;
  if (!p.experts.empty()) {
    const auto& stack = p.experts[static_cast<std::size_t>(domain)];
    Require(stack.size() == p.backbone.layers.size(),
            "expert stack depth does not match the backbone");
    r.expert = &stack[layer];
  }
  if (p.common) {
    Require(p.common->size() == p.backbone.layers.size(),
            "common adapter depth does not match the backbone");
    r.common = &(*p.common)[layer];
  }
  const auto& w = p.backbone.layers[layer];
  for (const LayerAdapters<T>* a : {r.expert, r.common}) {
    if (a == nullptr) continue;
    CheckPair(a->wi, w.wi.rows(), w.wi.cols());
    CheckPair(a->wo, w.wo.rows(), w.wo.cols());
  }
  return r;
}

template <typename T>
void RunForward(const ModelParams<T>& p, int domain, const TokenBlock& block,
                ForwardState<T>& st) {
  const ModelConfig& c = p.config;
  const Backbone<T>& bb = p.backbone;
  st.prefix = ValidateInputs(p, domain, block);
  const int len = c.context_length;
  const int seq = st.prefix + len;
  const int d = c.d_model;
  const int dh = c.head_dim();
  const T alpha = static_cast<T>(c.alpha);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  Matrix<T> x(seq, d);
  for (int s = 0; s < st.prefix; ++s) {
    x.row(s) = p.prompts->row(s) + bb.pos_emb.row(s);
  }
  for (int i = 0; i < len; ++i) {
    x.row(st.prefix + i) = bb.tok_emb.row(block.tokens[static_cast<std::size_t>(i)]) +
                           bb.pos_emb.row(c.n_pt + i);
  }

  st.layers.resize(bb.layers.size());
  for (std::size_t l = 0; l < bb.layers.size(); ++l) {
    const LayerWeights<T>& w = bb.layers[l];
    LayerCache<T>& lc = st.layers[l];
    const Route<T> route = LayerRoute(p, domain, l);
    lc.x_in = x;
    LayerNormForward(x, w.ln1_g, w.ln1_b, lc.h, lc.ln1);
    lc.q.noalias() = lc.h * w.wq;
    lc.k.noalias() = lc.h * w.wk;
    lc.v.noalias() = lc.h * w.wv;
    lc.ctx.setZero(seq, d);
    lc.probs.resize(static_cast<std::size_t>(c.n_heads));
    for (int hd = 0; hd < c.n_heads; ++hd) {
      const int off = hd * dh;
      Matrix<T>& pr = lc.probs[static_cast<std::size_t>(hd)];
      pr.noalias() = (lc.q.middleCols(off, dh) *
                      lc.k.middleCols(off, dh).transpose()) * scale;
      for (int i = 0; i < seq; ++i) {
        const T mx = pr.row(i).head(i + 1).maxCoeff();
        T sum = 0;
        for (int j = 0; j <= i; ++j) {
          const T e = std::exp(pr(i, j) - mx);
          pr(i, j) = e;
          sum += e;
        }
        pr.row(i).head(i + 1) /= sum;
        if (i + 1 < seq) pr.row(i).tail(seq - i - 1).setZero();
      }
      lc.ctx.middleCols(off, dh).noalias() = pr * lc.v.middleCols(off, dh);
    }
    x.noalias() += lc.ctx * w.wproj;
    lc.x_mid = x;
    LayerNormForward(x, w.ln2_g, w.ln2_b, lc.u, lc.ln2);
    lc.z.noalias() = lc.u * w.wi;
    if (route.expert) {
      lc.t_wi_expert.noalias() = lc.u * route.expert->wi.b;
      lc.z.noalias() += alpha * (lc.t_wi_expert * route.expert->wi.a);
    }
    if (route.common) {
      lc.t_wi_common.noalias() = lc.u * route.common->wi.b;
      lc.z.noalias() += alpha * (lc.t_wi_common * route.common->wi.a);
    }
    lc.act = lc.z.unaryExpr([](T v) { return Gelu(v); });
    x.noalias() += lc.act * w.wo;
    if (route.expert) {
      lc.t_wo_expert.noalias() = lc.act * route.expert->wo.b;
      x.noalias() += alpha * (lc.t_wo_expert * route.expert->wo.a);
    }
    if (route.common) {
      lc.t_wo_common.noalias() = lc.act * route.common->wo.b;
      x.noalias() += alpha * (lc.t_wo_common * route.common->wo.a);
    }
  }
  LayerNormForward(x, bb.lnf_g, bb.lnf_b, st.hf, st.lnf);
  st.logits.noalias() = st.hf.bottomRows(len) * bb.w_out;
}

// Softmax cross-entropy over valid targets; fills dlogits (scaled by
// 1/count) when non-null.
template <typename T>
T CrossEntropy(const Matrix<T>& logits, const TokenBlock& block,
               Matrix<T>* dlogits) {
  const Eigen::Index len = logits.rows();
  Require(static_cast<std::size_t>(len) == block.tokens.size(),
          "loss: logits rows must equal the block length");
  int count = 0;
  for (Eigen::Index i = 0; i + 1 < len; ++i) {
    if (block.pad_mask[static_cast<std::size_t>(i + 1)]) ++count;
  }
  Require(count > 0, "loss: block has fewer than 2 real tokens");
  if (dlogits) dlogits->setZero(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i + 1 < len; ++i) {
    if (!block.pad_mask[static_cast<std::size_t>(i + 1)]) continue;
    const TokenId target = block.tokens[static_cast<std::size_t>(i + 1)];
    const T mx = logits.row(i).maxCoeff();
    const T lse =
        mx + std::log((logits.row(i).array() - mx).exp().sum());
    total += static_cast<double>(lse - logits(i, target));
    if (dlogits) {
      dlogits->row(i) = (logits.row(i).array() - lse).exp() /
                        static_cast<T>(count);
      (*dlogits)(i, target) -= T(1) / static_cast<T>(count);
    }
  }
  return static_cast<T>(total / count);
}

}  // namespace

template <typename T>
Matrix<T> Forward(const ModelParams<T>& p, int domain, const TokenBlock& block) {
  ForwardState<T> st;
  RunForward(p, domain, block, st);
  return std::move(st.logits);
}

template <typename T>
T Loss(const Matrix<T>& logits, const TokenBlock& block) {
  return CrossEntropy<T>(logits, block, nullptr);
}

template <typename T>
double SequenceLogLikelihood(const ModelParams<T>& p, int domain,
                             std::span<const TokenId> tokens) {
  Require(tokens.size() >= 2,
          "sequence_log_likelihood: need at least 2 tokens");
  Require(tokens.size() <= static_cast<std::size_t>(p.config.context_length),
          "sequence_log_likelihood: input longer than the context length");
  const TokenBlock block =
      corpus::MakeBlock(tokens, p.config.context_length, domain, -1);
  const Matrix<T> logits = Forward(p, domain, block);
  double sum = 0.0;
  for (std::size_t l = 1; l < tokens.size(); ++l) {
    const auto row = logits.row(static_cast<Eigen::Index>(l - 1));
    const double mx = static_cast<double>(row.maxCoeff());
    double z = 0.0;
    for (Eigen::Index v = 0; v < row.size(); ++v) {
      z += std::exp(static_cast<double>(row(v)) - mx);
    }
    sum += static_cast<double>(row(tokens[l])) - mx - std::log(z);
  }
  return sum / static_cast<double>(tokens.size() - 1);
}

template <typename T>
Matrix<T> EffectiveWeight(const Matrix<T>& w,
                          const std::type_identity_t<LoraPair<T>>* expert,
                          const std::type_identity_t<LoraPair<T>>* common,
                          double alpha) {
  Matrix<T> out = w;
  for (const LoraPair<T>* pair : {expert, common}) {
    if (pair == nullptr) continue;
    CheckPair(*pair, w.rows(), w.cols());
    out.noalias() += static_cast<T>(alpha) * (pair->b * pair->a);
  }
  return out;
}

template <typename T>
ModelParams<T> MergeForDeployment(const ModelParams<T>& p, int domain) {
  ModelParams<T> out;
  out.config = p.config;
  out.backbone = p.backbone;
  out.prompts = p.prompts;
  if (!p.experts.empty()) {
    Require(domain >= 0 && domain < static_cast<int>(p.experts.size()),
            "merge: domain " + std::to_string(domain) + " outside [0, K)");
  }
  for (std::size_t l = 0; l < out.backbone.layers.size(); ++l) {
    const Route<T> r = LayerRoute(p, domain, l);
    auto& w = out.backbone.layers[l];
    if (r.expert == nullptr && r.common == nullptr) continue;
    w.wi = EffectiveWeight(w.wi, r.expert ? &r.expert->wi : nullptr,
                           r.common ? &r.common->wi : nullptr, p.config.alpha);
    w.wo = EffectiveWeight(w.wo, r.expert ? &r.expert->wo : nullptr,
                           r.common ? &r.common->wo : nullptr, p.config.alpha);
  }
  return out;
}

template <typename T>
GradLayout::GradLayout(const ModelParams<T>& p, const Selection& sel)
    : sel_(sel) {
  ForEachTensor(p, sel, [&](const std::string& name, const Matrix<T>& m) {
    offsets_[name] = static_cast<std::ptrdiff_t>(size_);
    size_ += static_cast<std::size_t>(m.size());
  });
}

std::ptrdiff_t GradLayout::Offset(const std::string& name) const {
  auto it = offsets_.find(name);
  return it == offsets_.end() ? -1 : it->second;
}

template <typename T>
T LossAndGradient(const ModelParams<T>& p, const GradLayout& layout,
                  const TokenBlock& block, std::span<T> grad) {
  Require(grad.size() == layout.size(), "gradient buffer size mismatch");
  // Eigen picks packet or scalar paths from the destination address, so the
  // low bits would depend on the caller's buffer alignment. Work in an
  // Eigen-owned buffer and copy out.
  Vector<T> work = Vector<T>::Zero(static_cast<Eigen::Index>(layout.size()));
  const ModelConfig& c = p.config;
  const Backbone<T>& bb = p.backbone;
  const int domain = block.domain;
  ForwardState<T> st;
  RunForward(p, domain, block, st);
  Matrix<T> dlogits;
  const T loss = CrossEntropy(st.logits, block, &dlogits);

  auto slot = [&](const std::string& name) -> T* {
    const std::ptrdiff_t off = layout.Offset(name);
    return off < 0 ? nullptr : work.data() + off;
  };
  auto accumulate = [](T* dst, const Matrix<T>& src) {
    if (dst == nullptr) return;
    MapMatrix<T>(dst, src.rows(), src.cols()) += src;
  };

  const int len = c.context_length;
  const int seq = st.prefix + len;
  const int d = c.d_model;
  const int dh = c.head_dim();
  const T alpha = static_cast<T>(c.alpha);
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const std::string expert_prefix = "expert/" + std::to_string(domain) + "/";

  if (T* g = slot("backbone/w_out")) {
    MapMatrix<T>(g, d, c.vocab_size).noalias() +=
        st.hf.bottomRows(len).transpose() * dlogits;
  }
  Matrix<T> dhf = Matrix<T>::Zero(seq, d);
  dhf.bottomRows(len).noalias() = dlogits * bb.w_out.transpose();
  Matrix<T> dx = LayerNormBackward(dhf, bb.lnf_g, st.lnf, slot("backbone/lnf_g"),
                                   slot("backbone/lnf_b"));

  // Adapter backward for y += alpha * (x B) A given dy; returns dx share.
  auto adapter_backward = [&](const LoraPair<T>& pair, const Matrix<T>& x,
                              const Matrix<T>& t, const Matrix<T>& dy,
                              T* ga, T* gb, Matrix<T>& dx_acc) {
    if (ga) {
      MapMatrix<T>(ga, pair.a.rows(), pair.a.cols()).noalias() +=
          alpha * (t.transpose() * dy);
    }
    const Matrix<T> dt = alpha * (dy * pair.a.transpose());
    if (gb) {
      MapMatrix<T>(gb, pair.b.rows(), pair.b.cols()).noalias() +=
          x.transpose() * dt;
    }
    dx_acc.noalias() += dt * pair.b.transpose();
  };

  for (std::size_t li = bb.layers.size(); li-- > 0;) {
    const LayerWeights<T>& w = bb.layers[li];
    const LayerCache<T>& lc = st.layers[li];
    const Route<T> route = LayerRoute(p, domain, li);
    const std::string bp = "backbone/" + std::to_string(li) + "/";
    const std::string ep = expert_prefix + std::to_string(li) + "/";
    const std::string cp = "common/" + std::to_string(li) + "/";

    // FFN: x_out = x_mid + act Wo_eff, act = gelu(u Wi_eff).
    Matrix<T> dact = dx * w.wo.transpose();
    if (T* g = slot(bp + "Wo")) {
      MapMatrix<T>(g, w.wo.rows(), w.wo.cols()).noalias() +=
          lc.act.transpose() * dx;
    }
    if (route.expert) {
      adapter_backward(route.expert->wo, lc.act, lc.t_wo_expert, dx,
                       slot(ep + "Wo/A"), slot(ep + "Wo/B"), dact);
    }
    if (route.common) {
      adapter_backward(route.common->wo, lc.act, lc.t_wo_common, dx,
                       slot(cp + "Wo/A"), slot(cp + "Wo/B"), dact);
    }
    const Matrix<T> dz =
        (dact.array() * lc.z.unaryExpr([](T v) { return GeluGrad(v); }).array())
            .matrix();
    Matrix<T> du = dz * w.wi.transpose();
    if (T* g = slot(bp + "Wi")) {
      MapMatrix<T>(g, w.wi.rows(), w.wi.cols()).noalias() +=
          lc.u.transpose() * dz;
    }
    if (route.expert) {
      adapter_backward(route.expert->wi, lc.u, lc.t_wi_expert, dz,
                       slot(ep + "Wi/A"), slot(ep + "Wi/B"), du);
    }
    if (route.common) {
      adapter_backward(route.common->wi, lc.u, lc.t_wi_common, dz,
                       slot(cp + "Wi/A"), slot(cp + "Wi/B"), du);
    }
    dx += LayerNormBackward(du, w.ln2_g, lc.ln2, slot(bp + "ln2_g"),
                            slot(bp + "ln2_b"));

    // Attention: x_mid = x_in + ctx Wproj.
    const Matrix<T> dctx = dx * w.wproj.transpose();
    if (T* g = slot(bp + "wproj")) {
      MapMatrix<T>(g, d, d).noalias() += lc.ctx.transpose() * dx;
    }
    Matrix<T> dq(seq, d), dk(seq, d), dv(seq, d);
    for (int hd = 0; hd < c.n_heads; ++hd) {
      const int off = hd * dh;
      const Matrix<T>& pr = lc.probs[static_cast<std::size_t>(hd)];
      const auto dctx_h = dctx.middleCols(off, dh);
      dv.middleCols(off, dh).noalias() = pr.transpose() * dctx_h;
      Matrix<T> dp = dctx_h * lc.v.middleCols(off, dh).transpose();
      const Vector<T> rowdot = (dp.array() * pr.array()).rowwise().sum();
      Matrix<T> ds =
          ((dp.array().colwise() - rowdot.array()) * pr.array()).matrix() *
          scale;
      dq.middleCols(off, dh).noalias() = ds * lc.k.middleCols(off, dh);
      dk.middleCols(off, dh).noalias() =
          ds.transpose() * lc.q.middleCols(off, dh);
    }
    Matrix<T> dh_in = dq * w.wq.transpose();
    dh_in.noalias() += dk * w.wk.transpose();
    dh_in.noalias() += dv * w.wv.transpose();
    if (T* g = slot(bp + "wq")) {
      MapMatrix<T>(g, d, d).noalias() += lc.h.transpose() * dq;
    }
    if (T* g = slot(bp + "wk")) {
      MapMatrix<T>(g, d, d).noalias() += lc.h.transpose() * dk;
    }
    if (T* g = slot(bp + "wv")) {
      MapMatrix<T>(g, d, d).noalias() += lc.h.transpose() * dv;
    }
    dx += LayerNormBackward(dh_in, w.ln1_g, lc.ln1, slot(bp + "ln1_g"),
                            slot(bp + "ln1_b"));
  }

  if (T* g = slot("prompts/P")) {
    accumulate(g, dx.topRows(st.prefix));
  }
  if (T* g = slot("backbone/tok_emb")) {
    MapMatrix<T> gm(g, c.vocab_size, d);
    for (int i = 0; i < len; ++i) {
      gm.row(block.tokens[static_cast<std::size_t>(i)]) += dx.row(st.prefix + i);
    }
  }
  if (T* g = slot("backbone/pos_emb")) {
    MapMatrix<T> gm(g, bb.pos_emb.rows(), d);
    for (int s = 0; s < st.prefix; ++s) gm.row(s) += dx.row(s);
    for (int i = 0; i < len; ++i) gm.row(c.n_pt + i) += dx.row(st.prefix + i);
  }
  std::copy(work.data(), work.data() + work.size(), grad.begin());
  return loss;
}

template <typename T>
PerSampleGradients<T> PerSampleGrads(const ModelParams<T>& p,
                                     const Selection& sel,
                                     std::span<const TokenBlock> batch,
                                     GradOptions options) {
  Require(!sel.Empty(), "per_sample_grads: empty parameter selection");
  Require(!sel.backbone || options.allow_backbone,
          "per_sample_grads: the backbone is frozen; its gradient may not be "
          "requested");
  Require(!sel.prompts || p.prompts.has_value(),
          "per_sample_grads: prompts requested but absent");
  Require(!sel.common || p.common.has_value(),
          "per_sample_grads: common adapter requested but absent");
  Require(sel.experts == Selection::kNoExperts || !p.experts.empty(),
          "per_sample_grads: experts requested but absent");
  const GradLayout layout(p, sel);
  PerSampleGradients<T> out;
  out.grads.assign(batch.size(), std::vector<T>(layout.size()));
  out.losses.assign(batch.size(), T(0));
  ParallelFor(batch.size(), [&](std::size_t i) {
    out.losses[i] = LossAndGradient(p, layout, batch[i], std::span<T>(out.grads[i]));
  });
  return out;
}

#define NOE_INSTANTIATE(T)                                                    \
  template Matrix<T> Forward<T>(const ModelParams<T>&, int,                   \
                                const TokenBlock&);                           \
  template T Loss<T>(const Matrix<T>&, const TokenBlock&);                    \
  template double SequenceLogLikelihood<T>(const ModelParams<T>&, int,        \
                                           std::span<const TokenId>);         \
  template Matrix<T> EffectiveWeight<T>(const Matrix<T>&,                     \
                                        const LoraPair<T>*,                   \
                                        const LoraPair<T>*, double);          \
  template ModelParams<T> MergeForDeployment<T>(const ModelParams<T>&, int);  \
  template GradLayout::GradLayout(const ModelParams<T>&, const Selection&);   \
  template T LossAndGradient<T>(const ModelParams<T>&, const GradLayout&,     \
                                const TokenBlock&, std::span<T>);             \
  template PerSampleGradients<T> PerSampleGrads<T>(                           \
      const ModelParams<T>&, const Selection&, std::span<const TokenBlock>,   \
      GradOptions);

NOE_INSTANTIATE(float)
NOE_INSTANTIATE(double)
#undef NOE_INSTANTIATE

}  // namespace noe::model
