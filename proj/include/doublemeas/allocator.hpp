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
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "doublemeas/diagnostics.hpp"
#include "doublemeas/errors.hpp"
#include "doublemeas/ledger.hpp"
#include "doublemeas/pauli.hpp"
#include "doublemeas/posterior.hpp"
#include "doublemeas/rng.hpp"
#include "doublemeas/state.hpp"

namespace doublemeas {

enum class ActionKind { group, double_copy };

struct MeasurementAction {
  ActionKind kind = ActionKind::group;
  std::size_t group = 0;

  double cost() const { return kind == ActionKind::group ? 1.0 : 2.0; }
  friend bool operator==(const MeasurementAction&, const MeasurementAction&) = default;
};

// Expected-outcome update of a ledger for one hypothetical action. Group:
// each measured term gains theta / (1 - theta) single counts, pairs inside
// the group gain their expected joint outcome, pairs with one member inside
// gain that member's expected outcome. Double: every term gains phi/2 and
// (1-phi)/2 double counts and every commuting pair its expected joint double
// outcome halved. The input ledger is not modified.
inline TallyLedger virtual_update(const TallyLedger& ledger, const MeasurementAction& action,
                                  const GroupCover& cover, const PosteriorConfig& cfg = {}) {
  TallyLedger v = ledger;
  const std::size_t p = ledger.terms();
  std::vector<SingleMoments> sm(p);
  for (std::size_t i = 0; i < p; ++i) sm[i] = single_moments(ledger.single(i), cfg);
  if (action.kind == ActionKind::double_copy) {
    for (std::size_t i = 0; i < p; ++i) {
      v.single(i).d_plus += sm[i].phi / 2.0;
      v.single(i).d_minus += (1.0 - sm[i].phi) / 2.0;
    }
    for (std::size_t k = 0; k < ledger.pair_count(); ++k) {
      const PairMoments pm = pair_moments(ledger.pair(k), cfg);
      for (int s = 0; s < 4; ++s) v.pair(k).d_joint[s] += pm.phi_joint[s] / 2.0;
    }
    v.add_shots(1.0, 1.0);
    return v;
  }
  if (action.group >= cover.size()) throw InvalidInput("unknown group " + std::to_string(action.group));
  const auto& g = cover.groups[action.group];
  std::vector<char> in(p, 0);
  for (auto i : g) in[i] = 1;
  for (auto i : g) {
    v.single(i).s_plus += sm[i].theta;
    v.single(i).s_minus += 1.0 - sm[i].theta;
  }
  for (std::size_t k = 0; k < ledger.pair_count(); ++k) {
    const auto [i, j] = ledger.pair_terms(k);
    if (in[i] && in[j]) {
      const PairMoments pm = pair_moments(ledger.pair(k), cfg);
      for (int s = 0; s < 4; ++s) v.pair(k).s_joint[s] += pm.theta_joint[s];
    } else if (in[i]) {
      v.pair(k).s_i_indep[0] += sm[i].theta;
      v.pair(k).s_i_indep[1] += 1.0 - sm[i].theta;
    } else if (in[j]) {
      v.pair(k).s_j_indep[0] += sm[j].theta;
      v.pair(k).s_j_indep[1] += 1.0 - sm[j].theta;
    }
  }
  v.add_shots(1.0, 0.0);
  return v;
}

// Pair node sets are reused, reweighted to the new counts, while the counts
// have grown by at most kReuseGrowth of their total plus kReuseSlack and the
// effective sample size stays above kReuseEss of its value at build time.
inline constexpr double kReuseGrowth = 0.3;
inline constexpr double kReuseSlack = 2.0;
inline constexpr double kReuseEss = 0.5;

// Incremental variance bookkeeping for one ledger. Keeps per-term and
// per-pair contributions to the posterior variance together with their
// values after each kind of hypothetical action, so that every candidate is
// priced by summing the changes it touches. Pair posteriors are held as
// weighted node sets that are reweighted exactly as counts arrive and rebuilt
// when their effective sample size decays.
class VarianceModel {
 public:
  VarianceModel(const Observable& obs, const GroupCover& cover, const PosteriorConfig& cfg, bool with_double)
      : obs_(&obs), cover_(&cover), cfg_(cfg), with_double_(with_double) {
    const TallyLedger shape(obs);
    terms_.resize(obs.size());
    pairs_.resize(shape.pair_count());
    for (const auto& g : cover.groups)
      for (std::size_t a = 0; a < g.size(); ++a)
        for (std::size_t b = a + 1; b < g.size(); ++b) {
          const auto k = shape.pair_index(g[a], g[b]);
          if (k >= 0) pairs_[static_cast<std::size_t>(k)].grouped = true;
        }
  }

  // The model keeps pointers to obs, cover and the last refreshed ledger.
  VarianceModel(Observable&&, const GroupCover&, const PosteriorConfig&, bool) = delete;
  VarianceModel(const Observable&, GroupCover&&, const PosteriorConfig&, bool) = delete;
  void refresh(TallyLedger&&) = delete;

  void refresh(const TallyLedger& ledger) {
    if (ledger.terms() != terms_.size() || ledger.pair_count() != pairs_.size())
      throw InvalidInput("ledger does not match the variance model");
    for (std::size_t i = 0; i < terms_.size(); ++i) refresh_term(i, ledger.single(i));
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const auto [i, j] = ledger.pair_terms(k);
      refresh_pair(k, i, j, ledger.pair(k));
    }
    double v = 0.0, m = obs_->identity_offset;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      v += terms_[i].s;
      m += obs_->terms[i].coefficient * (2.0 * terms_[i].moments.theta - 1.0);
    }
    for (const auto& p : pairs_) v += p.c;
    raw_variance_ = v;
    mean_ = m;
    ledger_ = &ledger;
  }

  double mean() const { return mean_; }
  double variance() const { return clamp_variance(raw_variance_, nullptr, true); }
  double raw_variance() const { return raw_variance_; }

  double predicted_variance(const MeasurementAction& a) const {
    double v = raw_variance_;
    if (a.kind == ActionKind::double_copy) {
      v = 0.0;
      for (const auto& t : terms_) v += t.s_double;
      for (const auto& p : pairs_) v += p.c_double;
      return clamp_variance(v, nullptr, true);
    }
    const auto& g = cover_->groups.at(a.group);
    scratch_.assign(terms_.size(), 0);
    for (auto i : g) scratch_[i] = 1;
    for (auto i : g) {
      v += terms_[i].s_group - terms_[i].s;
      for (std::size_t k : ledger_->pairs_of(i)) {
        const auto [pi, pj] = ledger_->pair_terms(k);
        const auto& p = pairs_[k];
        if (scratch_[pi] && scratch_[pj]) {
          if (i == pi) v += p.c_joint - p.c;
        } else {
          v += (i == pi ? p.c_cross_i : p.c_cross_j) - p.c;
        }
      }
    }
    return clamp_variance(v, nullptr, true);
  }

  std::size_t pair_rebuilds() const { return rebuilds_; }
  // Current covariance contribution 8 c_i c_j Cov(theta_i, theta_j) of pair k.
  double pair_contribution(std::size_t k) const { return pairs_.at(k).c; }

 private:
  struct TermCache {
    bool valid = false;
    SingleTally tally;
    SingleMoments moments;
    double s = 0.0, s_group = 0.0, s_double = 0.0;
  };
  struct PairCache {
    bool valid = false;
    bool grouped = false;
    PairTally tally;
    std::shared_ptr<PairNodeSet> nodes;
    PairFeatureVector built_at = PairFeatureVector::Zero();
    double built_ess = 0.0;
    double c = 0.0, c_joint = 0.0, c_cross_i = 0.0, c_cross_j = 0.0, c_double = 0.0;
  };

  static bool same(const SingleTally& a, const SingleTally& b) {
    return a.s_plus == b.s_plus && a.s_minus == b.s_minus && a.d_plus == b.d_plus && a.d_minus == b.d_minus;
  }
  static bool same(const PairTally& a, const PairTally& b) {
    return a.s_joint == b.s_joint && a.d_joint == b.d_joint && a.s_i_indep == b.s_i_indep &&
           a.s_j_indep == b.s_j_indep;
  }

  void refresh_term(std::size_t i, const SingleTally& t) {
    auto& tc = terms_[i];
    if (tc.valid && same(tc.tally, t)) return;
    const double c2 = 4.0 * obs_->terms[i].coefficient * obs_->terms[i].coefficient;
    tc.tally = t;
    tc.moments = single_moments(t, cfg_);
    tc.s = c2 * tc.moments.variance();
    SingleTally g = t;
    g.s_plus += tc.moments.theta;
    g.s_minus += 1.0 - tc.moments.theta;
    tc.s_group = c2 * single_moments(g, cfg_).variance();
    if (with_double_) {
      SingleTally d = t;
      d.d_plus += tc.moments.phi / 2.0;
      d.d_minus += (1.0 - tc.moments.phi) / 2.0;
      tc.s_double = c2 * single_moments(d, cfg_).variance();
    }
    tc.valid = true;
  }

  static double ess(const Eigen::ArrayXd& lw) {
    const double mx = lw.maxCoeff();
    const Eigen::ArrayXd w = (lw - mx).exp();
    const double s = w.sum();
    return s * s / w.square().sum();
  }

  const PairNodeSet& nodes_for(PairCache& pc, const PairTally& t) {
    const PairFeatureVector now = pair_counts_vector(t);
    if (pc.nodes) {
      const PairFeatureVector delta = now - pc.built_at;
      const double grown = delta.sum();
      const double base = pc.built_at.sum();
      bool keep = grown <= kReuseGrowth * base + kReuseSlack && (delta.array() >= 0.0).all();
      if (keep && grown > 0.0) keep = ess(pc.nodes->log_weight + (pc.nodes->features * delta).array()) >= kReuseEss * pc.built_ess;
      if (keep) return *pc.nodes;
    }
    pc.nodes = std::make_shared<PairNodeSet>(pair_nodes(t, cfg_));
    pc.built_at = now;
    pc.built_ess = ess(pc.nodes->log_weight);
    ++rebuilds_;
    return *pc.nodes;
  }

  void refresh_pair(std::size_t k, std::size_t i, std::size_t j, const PairTally& t) {
    auto& pc = pairs_[k];
    if (pc.valid && same(pc.tally, t)) return;
    pc.tally = t;
    pc.valid = true;
    pc.c = pc.c_joint = pc.c_cross_i = pc.c_cross_j = pc.c_double = 0.0;
    const bool joint = t.has_joint();
    if (!joint && !pc.grouped && !with_double_) return;
    const double w = 8.0 * obs_->terms[i].coefficient * obs_->terms[j].coefficient;
    const PairNodeSet& ns = nodes_for(pc, t);
    const PairFeatureVector offset = pair_counts_vector(t) - pc.built_at;
    const PairMoments base = pair_moments_from_nodes(ns, offset);
    auto cov_after = [&](const PairTally& after, const PairFeatureVector& add) {
      if (covariance_vanishes(after)) return 0.0;
      return w * pair_moments_from_nodes(ns, offset + add).covariance();
    };
    if (!covariance_vanishes(t)) pc.c = w * base.covariance();
    if (pc.grouped) {
      PairTally a = t;
      PairFeatureVector add = PairFeatureVector::Zero();
      for (int s = 0; s < 4; ++s) {
        a.s_joint[s] += base.theta_joint[s];
        add(s) = base.theta_joint[s];
      }
      pc.c_joint = cov_after(a, add);
    }
    if (joint) {
      const double ti = terms_[i].moments.theta, tj = terms_[j].moments.theta;
      PairTally a = t;
      a.s_i_indep[0] += ti;
      a.s_i_indep[1] += 1.0 - ti;
      PairFeatureVector add = PairFeatureVector::Zero();
      add(8) = ti;
      add(9) = 1.0 - ti;
      pc.c_cross_i = cov_after(a, add);
      a = t;
      a.s_j_indep[0] += tj;
      a.s_j_indep[1] += 1.0 - tj;
      add.setZero();
      add(10) = tj;
      add(11) = 1.0 - tj;
      pc.c_cross_j = cov_after(a, add);
    }
    if (with_double_) {
      PairTally a = t;
      PairFeatureVector add = PairFeatureVector::Zero();
      for (int s = 0; s < 4; ++s) {
        a.d_joint[s] += base.phi_joint[s] / 2.0;
        add(4 + s) = base.phi_joint[s] / 2.0;
      }
      pc.c_double = cov_after(a, add);
    }
  }

  const Observable* obs_;
  const GroupCover* cover_;
  PosteriorConfig cfg_;
  bool with_double_;
  std::vector<TermCache> terms_;
  std::vector<PairCache> pairs_;
  const TallyLedger* ledger_ = nullptr;
  double raw_variance_ = 0.0, mean_ = 0.0;
  std::size_t rebuilds_ = 0;
  mutable std::vector<char> scratch_;
};

struct AllocationConfig {
  double budget = 100.0;         // in effective shots; a double shot costs 2
  bool enable_double = true;
  double max_shots = 0.0;        // optional cap on shots taken, 0 for none
  std::uint64_t seed = 1;
  std::size_t max_qubits = kDefaultMaxQubits;
  PosteriorConfig posterior;
};

// Candidates are the groups in index order, then the double action when
// enabled and affordable. The lowest predicted variance wins; a later
// candidate must beat the incumbent by a relative 1e-12 so that exact ties
// go to the lower index.
inline std::optional<MeasurementAction> choose_action(const VarianceModel& model, const GroupCover& cover,
                                                      double remaining, bool enable_double,
                                                      double* predicted = nullptr) {
  std::optional<MeasurementAction> best;
  double best_v = std::numeric_limits<double>::infinity();
  if (cover.size() == 0) return best;  // nothing to measure
  auto consider = [&](const MeasurementAction& a) {
    const double v = model.predicted_variance(a);
    if (!best || v < best_v - 1e-12 * std::abs(best_v)) {
      best = a;
      best_v = v;
    }
  };
  if (remaining >= 1.0)
    for (std::size_t g = 0; g < cover.size(); ++g) consider({ActionKind::group, g});
  if (enable_double && remaining >= 2.0) consider({ActionKind::double_copy, 0});
  if (predicted) *predicted = best_v;
  return best;
}

struct TraceRow {
  std::size_t step = 0;
  ActionKind kind = ActionKind::group;
  std::size_t group = 0;
  double predicted_variance = 0.0;
  double realized_variance = 0.0;
  double m = 0.0;
  double m_double = 0.0;

  double m_eff() const { return m + m_double; }
};

struct AllocationResult {
  std::vector<TraceRow> trace;
  std::vector<MeasurementAction> actions;
  TallyLedger ledger;
  double mean = 0.0;
  double variance = 0.0;
};

inline ShotOutcome sample_action(const StateVector& state, const Observable& obs, const GroupCover& cover,
                                 const MeasurementAction& a, Rng& rng, std::size_t max_qubits) {
  if (a.kind == ActionKind::double_copy) return sample_double_shot(state, obs, rng, max_qubits);
  return sample_group_shot(state, obs, cover.groups.at(a.group), a.group, rng);
}

// Greedy adaptive allocation: repeatedly takes the affordable action with the
// lowest predicted posterior variance, samples it on `state`, and records it,
// until the budget cannot fund any action.
inline AllocationResult run_allocation(const Observable& obs, const GroupCover& cover, const StateVector& state,
                                       const AllocationConfig& cfg) {
  if (!(cfg.budget >= 1.0)) throw InvalidInput("budget must be at least 1");
  check_dense_width(state.width, cfg.max_qubits);
  if (cfg.enable_double) check_dense_width(2 * state.width, 2 * cfg.max_qubits);
  AllocationResult res;
  res.ledger = TallyLedger(obs);
  VarianceModel model(obs, cover, cfg.posterior, cfg.enable_double);
  model.refresh(res.ledger);
  Rng rng(cfg.seed);
  for (std::size_t step = 1;; ++step) {
    const double remaining = cfg.budget - res.ledger.effective_shots();
    if (cfg.max_shots > 0.0 && res.ledger.shots() >= cfg.max_shots) break;
    double predicted = 0.0;
    const auto a = choose_action(model, cover, remaining, cfg.enable_double, &predicted);
    if (!a) break;
    res.ledger.record(sample_action(state, obs, cover, *a, rng, cfg.max_qubits));
    model.refresh(res.ledger);
    res.actions.push_back(*a);
    res.trace.push_back(TraceRow{step, a->kind, a->kind == ActionKind::group ? a->group : 0, predicted,
                                 model.variance(), res.ledger.shots(), res.ledger.double_shots()});
  }
  res.mean = model.mean();
  res.variance = model.variance();
  return res;
}

inline std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "step,kind,group,predicted_variance,realized_variance,m,m_double\n";
  for (const auto& r : trace)
    os << r.step << ',' << (r.kind == ActionKind::group ? "group" : "double") << ','
       << (r.kind == ActionKind::group ? std::to_string(r.group) : std::string()) << ',' << r.predicted_variance
       << ',' << r.realized_variance << ',' << r.m << ',' << r.m_double << '\n';
  return os.str();
}

}  // namespace doublemeas
