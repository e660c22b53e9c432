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


// Cross-domain membership inference: likelihood scores under a deployed
// domain model, threshold ROC, AUC and TPR at a fixed FPR.

#ifndef NOE_CORE_ATTACK_HPP_
#define NOE_CORE_ATTACK_HPP_

#include <string>
#include <vector>

#include "core/corpus.hpp"
#include "core/params.hpp"
#include "json.hpp"

namespace noe::attack {

struct ScoreResult {
  std::vector<double> scores;
  int skipped = 0;  // documents with fewer than 2 tokens
};

// Average log-likelihood of each document's first min(L, n) tokens.
ScoreResult ScoreDocuments(const model::ModelParams<float>& deployed,
                           int domain,
                           const std::vector<const corpus::Document*>& docs,
                           int length);

struct AttackScores {
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;
  int attacking_domain = 0;
  int target_domain = 0;
  std::string model_tag;

  void Validate() const;
};

struct RocPoint {
  double threshold = 0.0;  // predict member when score > threshold
  double fpr = 0.0;
  double tpr = 0.0;
};
using RocCurve = std::vector<RocPoint>;

// Thresholds: +inf, every distinct score in decreasing order, -inf.
RocCurve ComputeRoc(const AttackScores& scores);
double Auc(const RocCurve& curve);
// TPR at `target_fpr`, linearly interpolated between the bracketing points
// when no threshold hits it exactly.
double TprAtFpr(const RocCurve& curve, double target_fpr = 0.01);

struct AttackReport {
  int attacker = 0;
  int target = 0;
  double auc = 0.5;
  double tpr_at_1 = 0.0;
  int n_members = 0;
  int n_nonmembers = 0;
  int skipped = 0;
  RocCurve curve;
};

nlohmann::json ToJson(const AttackReport& r, bool with_curve = true);
AttackReport AttackReportFromJson(const nlohmann::json& j);
std::string RocCsv(const RocCurve& curve);

AttackReport ReportFromScores(const AttackScores& scores, int skipped = 0);

// Deploys the attacker's domain model and scores the target domain's train
// (members) and test (nonmembers) documents.
AttackReport CrossDomainAttack(const model::ModelParams<float>& params,
                               int attacker, int target,
                               const corpus::Corpus& corpus, int length);

}  // namespace noe::attack

#endif  // NOE_CORE_ATTACK_HPP_
