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


#include "core/eval.hpp"

#include <atomic>
#include <sstream>

#include "core/common.hpp"
#include "core/transformer.hpp"

namespace noe::eval {
namespace {

// Argmax with the lowest index winning ties.
int Argmax(const Eigen::Ref<const Eigen::Matrix<float, 1, Eigen::Dynamic>>& row) {
  Eigen::Index best = 0;
  row.maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<uint8_t> CorrectMask(const model::ModelParams<float>& m, int domain,
                                 const corpus::TokenBlock& block) {
  const model::Matrix<float> logits = model::Forward(m, domain, block);
  std::vector<uint8_t> ok;
  for (std::size_t i = 0; i + 1 < block.tokens.size(); ++i) {
    if (!block.pad_mask[i + 1]) break;
    ok.push_back(Argmax(logits.row(static_cast<Eigen::Index>(i))) ==
                 block.tokens[i + 1]);
  }
  return ok;
}

}  // namespace

AccuracyCount CountCorrect(const model::ModelParams<float>& model, int domain,
                           const std::vector<const corpus::Document*>& docs,
                           int length) {
  Require(!docs.empty(), "next_token_accuracy: empty test set");
  std::vector<AccuracyCount> per_doc(docs.size());
  ParallelFor(docs.size(), [&](std::size_t i) {
    const auto block = corpus::FirstWindow(*docs[i], length);
    for (uint8_t ok : CorrectMask(model, domain, block)) {
      per_doc[i].correct += ok;
      per_doc[i].total += 1;
    }
  });
  AccuracyCount total;
  for (const auto& c : per_doc) {
    total.correct += c.correct;
    total.total += c.total;
  }
  return total;
}

double NextTokenAccuracy(const model::ModelParams<float>& model, int domain,
                         const std::vector<const corpus::Document*>& docs,
                         int length) {
  return CountCorrect(model, domain, docs, length).value();
}

double EvalReport::MacroAccuracy() const {
  if (per_domain_accuracy.empty()) return 0.0;
  double s = 0;
  for (double a : per_domain_accuracy) s += a;
  return s / static_cast<double>(per_domain_accuracy.size());
}

nlohmann::json ToJson(const EvalReport& r) {
  return {{"per_domain_accuracy", r.per_domain_accuracy},
          {"macro_accuracy", r.MacroAccuracy()},
          {"variant", r.variant},
          {"seed", r.seed},
          {"epochs", r.epochs}};
}

EvalReport EvalReportFromJson(const nlohmann::json& j) {
  EvalReport r;
  r.per_domain_accuracy = j.at("per_domain_accuracy").get<std::vector<double>>();
  r.variant = j.value("variant", "");
  r.seed = j.value("seed", uint64_t{0});
  r.epochs = j.value("epochs", 0);
  return r;
}

EvalReport Evaluate(const model::ModelParams<float>& model,
                    const corpus::Corpus& corpus, int length,
                    const std::string& variant, uint64_t seed, int epochs) {
  EvalReport r;
  r.variant = variant;
  r.seed = seed;
  r.epochs = epochs;
  for (int k = 0; k < corpus.num_domains(); ++k) {
    r.per_domain_accuracy.push_back(NextTokenAccuracy(
        model, k, corpus.Select(corpus::Split::kTest, k), length));
  }
  return r;
}

std::vector<double> KnowledgeTransfer(const EvalReport& variant,
                                      const EvalReport& share_nothing) {
  Require(variant.per_domain_accuracy.size() ==
              share_nothing.per_domain_accuracy.size(),
          "knowledge_transfer: reports cover different domains");
  std::vector<double> delta;
  for (std::size_t k = 0; k < variant.per_domain_accuracy.size(); ++k) {
    delta.push_back(variant.per_domain_accuracy[k] -
                    share_nothing.per_domain_accuracy[k]);
  }
  return delta;
}

BridgeFraction ComputeBridgeFraction(const std::vector<double>& noesis,
                                     const std::vector<double>& share_nothing,
                                     const std::vector<double>& non_private,
                                     double min_gap) {
  Require(noesis.size() == share_nothing.size() &&
              noesis.size() == non_private.size(),
          "bridge_fraction: accuracy vectors differ in length");
  BridgeFraction b;
  double sum = 0;
  int defined = 0;
  for (std::size_t k = 0; k < noesis.size(); ++k) {
    const double gap = non_private[k] - share_nothing[k];
    if (gap > min_gap) {
      const double f = (noesis[k] - share_nothing[k]) / gap;
      b.per_domain.push_back(f);
      sum += f;
      ++defined;
    } else {
      b.per_domain.push_back(std::nullopt);
    }
  }
  if (defined > 0) b.average = sum / defined;
  return b;
}

nlohmann::json ToJson(const BridgeFraction& b) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& f : b.per_domain) {
    per.push_back(f ? nlohmann::json(*f) : nlohmann::json("undefined"));
  }
  return {{"per_domain", per},
          {"average", b.average ? nlohmann::json(*b.average)
                                : nlohmann::json("undefined")}};
}

PredictionDiff ComputePredictionDiff(const model::ModelParams<float>& model_a,
                                     const model::ModelParams<float>& model_b,
                                     int domain, const corpus::Document& doc,
                                     int length) {
  Require(model_a.config.vocab_size == model_b.config.vocab_size,
          "prediction_diff: models use different vocabularies");
  const auto block = corpus::FirstWindow(doc, length);
  Require(block.RealTokens() >= 2, "prediction_diff: document shorter than 2 tokens");
  const auto a = CorrectMask(model_a, domain, block);
  const auto b = CorrectMask(model_b, domain, block);
  PredictionDiff d;
  d.tokens.assign(block.tokens.begin(), block.tokens.begin() + block.RealTokens());
  for (std::size_t i = 0; i < a.size(); ++i) {
    d.markers.push_back(a[i] && b[i]   ? Marker::kBothCorrect
                        : !a[i] && !b[i] ? Marker::kBothWrong
                        : a[i]           ? Marker::kOnlyACorrect
                                         : Marker::kOnlyBCorrect);
  }
  return d;
}

std::string RenderAnsi(const PredictionDiff& diff) {
  std::ostringstream out;
  out << diff.tokens[0];
  for (std::size_t i = 0; i < diff.markers.size(); ++i) {
    const char* color = "";
    switch (diff.markers[i]) {
      case Marker::kBothWrong: color = "\x1b[31m"; break;
      case Marker::kOnlyBCorrect: color = "\x1b[34m"; break;
      case Marker::kOnlyACorrect: color = "\x1b[32m"; break;
      case Marker::kBothCorrect: break;
    }
    out << ' ' << color << diff.tokens[i + 1] << (*color ? "\x1b[0m" : "");
  }
  out << '\n';
  return out.str();
}

std::string RenderHtml(const PredictionDiff& diff, const std::string& title) {
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << title
      << "</title></head>\n<body><pre>" << diff.tokens[0];
  for (std::size_t i = 0; i < diff.markers.size(); ++i) {
    const char* color = nullptr;
    switch (diff.markers[i]) {
      case Marker::kBothWrong: color = "red"; break;
      case Marker::kOnlyBCorrect: color = "blue"; break;
      case Marker::kOnlyACorrect: color = "green"; break;
      case Marker::kBothCorrect: break;
    }
    out << ' ';
    if (color) {
      out << "<b style=\"color:" << color << "\">" << diff.tokens[i + 1] << "</b>";
    } else {
      out << diff.tokens[i + 1];
    }
  }
  out << "</pre></body></html>\n";
  return out.str();
}

}  // namespace noe::eval
