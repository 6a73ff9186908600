// Copyright 2026 The doublemeas Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "doublemeas/diagnostics.hpp"
#include "doublemeas/errors.hpp"
#include "doublemeas/pauli.hpp"
#include "doublemeas/posterior.hpp"
#include "doublemeas/state.hpp"

namespace doublemeas {

// Outcome counts for every term and every commuting pair of terms.
class TallyLedger {
 public:
  TallyLedger() = default;

  explicit TallyLedger(const Observable& obs) : terms_(obs.size()) {
    singles_.resize(terms_);
    pair_index_.assign(terms_ * terms_, -1);
    adjacency_.resize(terms_);
    for (std::size_t i = 0; i < terms_; ++i)
      for (std::size_t j = i + 1; j < terms_; ++j)
        if (commutes(obs.terms[i].pauli, obs.terms[j].pauli)) {
          const auto k = static_cast<std::int32_t>(pair_terms_.size());
          pair_terms_.emplace_back(i, j);
          pair_index_[i * terms_ + j] = pair_index_[j * terms_ + i] = k;
          adjacency_[i].push_back(static_cast<std::size_t>(k));
          adjacency_[j].push_back(static_cast<std::size_t>(k));
        }
    pairs_.resize(pair_terms_.size());
  }

  std::size_t terms() const { return terms_; }
  std::size_t pair_count() const { return pairs_.size(); }

  const SingleTally& single(std::size_t i) const { return singles_.at(i); }
  SingleTally& single(std::size_t i) { return singles_.at(i); }
  const PairTally& pair(std::size_t k) const { return pairs_.at(k); }
  PairTally& pair(std::size_t k) { return pairs_.at(k); }
  std::pair<std::size_t, std::size_t> pair_terms(std::size_t k) const { return pair_terms_.at(k); }

  // Index of the commuting pair {i, j}, or -1.
  std::int32_t pair_index(std::size_t i, std::size_t j) const { return pair_index_.at(i * terms_ + j); }
  const std::vector<std::size_t>& pairs_of(std::size_t i) const { return adjacency_.at(i); }

  double shots() const { return shots_; }
  double double_shots() const { return double_shots_; }
  double effective_shots() const { return shots_ + double_shots_; }

  void add_shots(double m, double m_double) {
    shots_ += m;
    double_shots_ += m_double;
  }

  // Applies a sampled shot. Group shots add single counts to each measured
  // term, joint counts to commuting pairs measured together, and independent
  // counts to commuting pairs with one member measured. Double shots add
  // double counts to every term and every commuting pair and count twice
  // toward the effective shot total.
  void record(const ShotOutcome& shot) {
    std::vector<int> value(terms_, 0);
    for (const auto& o : shot.outcomes) {
      if (o.term >= terms_) throw InvalidInput("outcome for unknown term " + std::to_string(o.term));
      if (o.value != 1 && o.value != -1) throw InvalidInput("outcome values must be +1 or -1");
      if (value[o.term] != 0) throw InvalidInput("term " + std::to_string(o.term) + " measured twice in one shot");
      value[o.term] = o.value;
    }
    if (shot.kind == ShotKind::double_copy) {
      if (shot.outcomes.size() != terms_) throw InvalidInput("double shot must report every term");
      for (std::size_t i = 0; i < terms_; ++i) (value[i] > 0 ? singles_[i].d_plus : singles_[i].d_minus) += 1.0;
      for (std::size_t k = 0; k < pairs_.size(); ++k) {
        const auto [i, j] = pair_terms_[k];
        pairs_[k].d_joint[joint_slot(value[i], value[j])] += 1.0;
      }
      shots_ += 1.0;
      double_shots_ += 1.0;
      return;
    }
    for (const auto& o : shot.outcomes) {
      auto& s = singles_[o.term];
      (o.value > 0 ? s.s_plus : s.s_minus) += 1.0;
      for (std::size_t k : adjacency_[o.term]) {
        const auto [i, j] = pair_terms_[k];
        auto& pt = pairs_[k];
        if (value[i] != 0 && value[j] != 0) {
          if (o.term == i) pt.s_joint[joint_slot(value[i], value[j])] += 1.0;
        } else if (o.term == i) {
          pt.s_i_indep[value[i] > 0 ? 0 : 1] += 1.0;
        } else {
          pt.s_j_indep[value[j] > 0 ? 0 : 1] += 1.0;
        }
      }
    }
    shots_ += 1.0;
  }

  static std::size_t joint_slot(int vi, int vj) { return (vi > 0 ? 0 : 2) + (vj > 0 ? 0 : 1); }

 private:
  std::size_t terms_ = 0;
  std::vector<SingleTally> singles_;
  std::vector<PairTally> pairs_;
  std::vector<std::pair<std::size_t, std::size_t>> pair_terms_;
  std::vector<std::int32_t> pair_index_;
  std::vector<std::vector<std::size_t>> adjacency_;
  double shots_ = 0.0;
  double double_shots_ = 0.0;
};

// True when the pair covariance vanishes by symmetry: with no single-copy
// joint counts, flipping the sign of a member that has no independent counts
// leaves the posterior invariant and negates the covariance.
inline bool covariance_vanishes(const PairTally& t) {
  if (!t.has_joint()) return true;
  const bool no_s_joint = t.s_joint[0] == 0.0 && t.s_joint[1] == 0.0 && t.s_joint[2] == 0.0 && t.s_joint[3] == 0.0;
  if (!no_s_joint) return false;
  const bool no_i = t.s_i_indep[0] == 0.0 && t.s_i_indep[1] == 0.0;
  const bool no_j = t.s_j_indep[0] == 0.0 && t.s_j_indep[1] == 0.0;
  return no_i || no_j;
}

struct TermEstimate {
  std::string pauli;
  double coefficient = 0.0;
  double theta = 0.5;
  double theta_sq = 1.0 / 3.0;
  double variance_contribution = 0.0;  // 4 c^2 (theta_sq - theta^2)
};

struct PairEstimate {
  std::size_t i = 0, j = 0;
  double covariance = 0.0;
  double contribution = 0.0;  // 8 c_i c_j covariance
};

struct EstimateReport {
  double mean = 0.0;
  double variance = 0.0;
  double m = 0.0;
  double m_double = 0.0;
  double m_eff = 0.0;
  bool variance_clamped = false;
  std::vector<TermEstimate> terms;
  std::vector<PairEstimate> pairs;  // pairs with a non-zero covariance term
};

inline constexpr double kNegativeVarianceTolerance = 1e-9;

// Clamps a slightly negative variance sum to zero, with a diagnostic when it
// is more negative than round-off.
inline double clamp_variance(double v, bool* clamped = nullptr, bool quiet = false) {
  if (v >= 0.0) return v;
  if (v < -kNegativeVarianceTolerance && !quiet) warn("negative variance " + std::to_string(v) + " clamped to 0");
  if (clamped) *clamped = true;
  return 0.0;
}

// Posterior mean and variance of the observable estimate:
//   mean     = offset + sum_i c_i (2 theta_i - 1)
//   variance = 4 sum_i c_i^2 Var(theta_i)
//            + 8 sum_{i<j measured together} c_i c_j Cov(theta_i, theta_j)
// with single-term moments from the single posterior and each covariance from
// its pair posterior.
inline EstimateReport estimate(const TallyLedger& ledger, const Observable& obs, const PosteriorConfig& cfg = {}) {
  if (ledger.terms() != obs.size()) throw InvalidInput("ledger and observable disagree on term count");
  EstimateReport r;
  r.m = ledger.shots();
  r.m_double = ledger.double_shots();
  r.m_eff = ledger.effective_shots();
  r.mean = obs.identity_offset;
  double var = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double c = obs.terms[i].coefficient;
    const SingleMoments sm = single_moments(ledger.single(i), cfg);
    TermEstimate te{obs.terms[i].pauli.str(), c, sm.theta, sm.theta_sq, 4.0 * c * c * sm.variance()};
    r.mean += c * (2.0 * sm.theta - 1.0);
    var += te.variance_contribution;
    r.terms.push_back(std::move(te));
  }
  for (std::size_t k = 0; k < ledger.pair_count(); ++k) {
    const PairTally& pt = ledger.pair(k);
    if (covariance_vanishes(pt)) continue;
    const auto [i, j] = ledger.pair_terms(k);
    const PairMoments pm = pair_moments(pt, cfg);
    const double cov = pm.covariance();
    const double contrib = 8.0 * obs.terms[i].coefficient * obs.terms[j].coefficient * cov;
    var += contrib;
    r.pairs.push_back(PairEstimate{i, j, cov, contrib});
  }
  r.variance = clamp_variance(var, &r.variance_clamped);
  return r;
}

inline nlohmann::json to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["mean"] = r.mean;
  j["variance"] = r.variance;
  j["m"] = r.m;
  j["m_double"] = r.m_double;
  j["m_eff"] = r.m_eff;
  j["variance_clamped"] = r.variance_clamped;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : r.terms)
    j["terms"].push_back({{"pauli", t.pauli},
                          {"coefficient", t.coefficient},
                          {"theta", t.theta},
                          {"theta_sq", t.theta_sq},
                          {"variance_contribution", t.variance_contribution}});
  j["pairs"] = nlohmann::json::array();
  for (const auto& p : r.pairs)
    j["pairs"].push_back({{"i", p.i}, {"j", p.j}, {"covariance", p.covariance}, {"contribution", p.contribution}});
  return j;
}

inline EstimateReport report_from_json(const nlohmann::json& j) {
  EstimateReport r;
  r.mean = j.at("mean").get<double>();
  r.variance = j.at("variance").get<double>();
  r.m = j.at("m").get<double>();
  r.m_double = j.at("m_double").get<double>();
  r.m_eff = j.at("m_eff").get<double>();
  r.variance_clamped = j.value("variance_clamped", false);
  for (const auto& t : j.at("terms"))
    r.terms.push_back(TermEstimate{t.at("pauli").get<std::string>(), t.at("coefficient").get<double>(),
                                   t.at("theta").get<double>(), t.at("theta_sq").get<double>(),
                                   t.at("variance_contribution").get<double>()});
  for (const auto& p : j.at("pairs"))
    r.pairs.push_back(PairEstimate{p.at("i").get<std::size_t>(), p.at("j").get<std::size_t>(),
                                   p.at("covariance").get<double>(), p.at("contribution").get<double>()});
  return r;
}

}  // namespace doublemeas
