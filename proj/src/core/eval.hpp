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


// Next-token accuracy, knowledge transfer, bridge fraction and per-token
// prediction diffs.

#ifndef NOE_CORE_EVAL_HPP_
#define NOE_CORE_EVAL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/params.hpp"
#include "json.hpp"

namespace noe::eval {

struct AccuracyCount {
  int64_t correct = 0;
  int64_t total = 0;
  double value() const {
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
  }
};

// Teacher-forced argmax accuracy over targets 2..L of each document's first
// window, micro-averaged over scored positions.
AccuracyCount CountCorrect(const model::ModelParams<float>& model, int domain,
                           const std::vector<const corpus::Document*>& docs,
                           int length);
double NextTokenAccuracy(const model::ModelParams<float>& model, int domain,
                         const std::vector<const corpus::Document*>& docs,
                         int length);

struct EvalReport {
  std::vector<double> per_domain_accuracy;
  std::string variant;
  uint64_t seed = 0;
  int epochs = 0;

  // Unweighted mean across domains.
  double MacroAccuracy() const;
};

nlohmann::json ToJson(const EvalReport& r);
EvalReport EvalReportFromJson(const nlohmann::json& j);

// Accuracy on every domain's test split, routing each domain to its expert.
EvalReport Evaluate(const model::ModelParams<float>& model,
                    const corpus::Corpus& corpus, int length,
                    const std::string& variant, uint64_t seed, int epochs);

// variant - share_nothing, per domain.
std::vector<double> KnowledgeTransfer(const EvalReport& variant,
                                      const EvalReport& share_nothing);

struct BridgeFraction {
  std::vector<std::optional<double>> per_domain;  // nullopt = undefined
  std::optional<double> average;  // over the defined domains
};

// (noesis - share_nothing) / (non_private - share_nothing). A domain is
// undefined unless non_private - share_nothing > min_gap.
BridgeFraction ComputeBridgeFraction(const std::vector<double>& noesis,
                                     const std::vector<double>& share_nothing,
                                     const std::vector<double>& non_private,
                                     double min_gap = 0.0);
nlohmann::json ToJson(const BridgeFraction& b);

enum class Marker { kBothCorrect, kBothWrong, kOnlyACorrect, kOnlyBCorrect };

struct PredictionDiff {
  std::vector<corpus::TokenId> tokens;  // the scored window
  std::vector<Marker> markers;          // one per target position 2..n
};

PredictionDiff ComputePredictionDiff(const model::ModelParams<float>& model_a,
                                     const model::ModelParams<float>& model_b,
                                     int domain, const corpus::Document& doc,
                                     int length);

// Red: both wrong. Blue: only B correct. Green: only A correct. The first
// token is printed plain.
std::string RenderAnsi(const PredictionDiff& diff);
std::string RenderHtml(const PredictionDiff& diff, const std::string& title);

}  // namespace noe::eval

#endif  // NOE_CORE_EVAL_HPP_
