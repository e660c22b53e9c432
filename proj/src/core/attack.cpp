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


#include "core/attack.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "core/common.hpp"
#include "core/transformer.hpp"

namespace noe::attack {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

nlohmann::json NumberOrSentinel(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

double ParseThreshold(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>() == "inf" ? kInf : -kInf;
  return j.get<double>();
}

}  // namespace

ScoreResult ScoreDocuments(const model::ModelParams<float>& deployed,
                           int domain,
                           const std::vector<const corpus::Document*>& docs,
                           int length) {
  Require(!docs.empty(), "score_set: no documents to score");
  std::vector<double> all(docs.size(), std::nan(""));
  ParallelFor(docs.size(), [&](std::size_t i) {
    const auto& t = docs[i]->tokens;
    if (t.size() < 2) return;
    const std::size_t n = std::min(t.size(), static_cast<std::size_t>(length));
    all[i] = model::SequenceLogLikelihood(
        deployed, domain, std::span<const corpus::TokenId>(t.data(), n));
  });
  ScoreResult r;
  for (double s : all) {
    if (std::isnan(s)) {
      ++r.skipped;
    } else {
      r.scores.push_back(s);
    }
  }
  return r;
}

void AttackScores::Validate() const {
  Require(!member_scores.empty() && !nonmember_scores.empty(),
          "attack: member and nonmember score lists must be non-empty");
  for (const auto* list : {&member_scores, &nonmember_scores}) {
    for (double s : *list) Require(std::isfinite(s), "attack: non-finite score");
  }
}

RocCurve ComputeRoc(const AttackScores& s) {
  s.Validate();
  std::vector<double> members = s.member_scores;
  std::vector<double> nonmembers = s.nonmember_scores;
  std::sort(members.begin(), members.end(), std::greater<>());
  std::sort(nonmembers.begin(), nonmembers.end(), std::greater<>());
  std::vector<double> thresholds = members;
  thresholds.insert(thresholds.end(), nonmembers.begin(), nonmembers.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  const double np = static_cast<double>(members.size());
  const double nn = static_cast<double>(nonmembers.size());
  RocCurve curve{{kInf, 0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (double t : thresholds) {
    while (tp < members.size() && members[tp] > t) ++tp;
    while (fp < nonmembers.size() && nonmembers[fp] > t) ++fp;
    curve.push_back({t, fp / nn, tp / np});
  }
  curve.push_back({-kInf, 1.0, 1.0});
  return curve;
}

double Auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) *
            (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

double TprAtFpr(const RocCurve& curve, double target_fpr) {
  Require(target_fpr > 0.0 && target_fpr < 1.0,
          "tpr_at_fpr: target FPR must lie in (0, 1)");
  Require(!curve.empty(), "tpr_at_fpr: empty curve");
  // Exact hit: the most permissive threshold whose FPR equals the target.
  double exact = -1.0;
  for (const auto& p : curve) {
    if (p.fpr == target_fpr) exact = std::max(exact, p.tpr);
  }
  if (exact >= 0.0) return exact;
  const RocPoint* lo = nullptr;
  const RocPoint* hi = nullptr;
  for (const auto& p : curve) {
    if (p.fpr < target_fpr) lo = &p;
    if (p.fpr > target_fpr && hi == nullptr) hi = &p;
  }
  Require(lo != nullptr && hi != nullptr, "tpr_at_fpr: curve lacks endpoints");
  const double w = (target_fpr - lo->fpr) / (hi->fpr - lo->fpr);
  return lo->tpr + w * (hi->tpr - lo->tpr);
}

nlohmann::json ToJson(const AttackReport& r, bool with_curve) {
  nlohmann::json j = {{"attacker", r.attacker},
                      {"target", r.target},
                      {"auc", r.auc},
                      {"tpr_at_1", r.tpr_at_1},
                      {"n_members", r.n_members},
                      {"n_nonmembers", r.n_nonmembers},
                      {"skipped", r.skipped}};
  if (with_curve) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& p : r.curve) {
      c.push_back({NumberOrSentinel(p.threshold), p.fpr, p.tpr});
    }
    j["curve"] = c;
  }
  return j;
}

AttackReport AttackReportFromJson(const nlohmann::json& j) {
  AttackReport r;
  r.attacker = j.at("attacker").get<int>();
  r.target = j.at("target").get<int>();
  r.auc = j.at("auc").get<double>();
  r.tpr_at_1 = j.at("tpr_at_1").get<double>();
  r.n_members = j.at("n_members").get<int>();
  r.n_nonmembers = j.at("n_nonmembers").get<int>();
  r.skipped = j.value("skipped", 0);
  if (j.contains("curve")) {
    for (const auto& p : j.at("curve")) {
      r.curve.push_back({ParseThreshold(p.at(0)), p.at(1).get<double>(),
                         p.at(2).get<double>()});
    }
  }
  return r;
}

std::string RocCsv(const RocCurve& curve) {
  std::ostringstream out;
  out << std::setprecision(17) << "threshold,fpr,tpr\n";
  for (const auto& p : curve) {
    if (p.threshold == kInf) {
      out << "inf";
    } else if (p.threshold == -kInf) {
      out << "-inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
  return out.str();
}

AttackReport ReportFromScores(const AttackScores& scores, int skipped) {
  AttackReport r;
  r.attacker = scores.attacking_domain;
  r.target = scores.target_domain;
  r.curve = ComputeRoc(scores);
  r.auc = Auc(r.curve);
  r.tpr_at_1 = TprAtFpr(r.curve, 0.01);
  r.n_members = static_cast<int>(scores.member_scores.size());
  r.n_nonmembers = static_cast<int>(scores.nonmember_scores.size());
  r.skipped = skipped;
  return r;
}

AttackReport CrossDomainAttack(const model::ModelParams<float>& params,
                               int attacker, int target,
                               const corpus::Corpus& corpus, int length) {
  const int k_max = corpus.num_domains();
  Require(attacker >= 0 && attacker < k_max && target >= 0 && target < k_max,
          "attack: domain index outside [0, K)");
  Require(attacker != target,
          "attack: attacker and target domain must differ (cross-domain only)");
  const model::ModelParams<float> deployed =
      model::MergeForDeployment(params, attacker);
  const auto members = ScoreDocuments(
      deployed, attacker, corpus.Select(corpus::Split::kTrain, target), length);
  const auto nonmembers = ScoreDocuments(
      deployed, attacker, corpus.Select(corpus::Split::kTest, target), length);
  AttackScores s{members.scores, nonmembers.scores, attacker, target, ""};
  return ReportFromScores(s, members.skipped + nonmembers.skipped);
}

}  // namespace noe::attack
