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
#include <limits>
#include <string>
#include <tuple>
#include <vector>

#include "doublemeas/allocator.hpp"
#include "doublemeas/csv.hpp"
#include "doublemeas/ledger.hpp"
#include "doublemeas/rng.hpp"
#include "doublemeas/state.hpp"

namespace doublemeas {

inline std::string arm_name(bool with_double) { return with_double ? "double" : "single"; }

inline std::string fmt(double v) { return detail::format_double(v); }

// ---------------------------------------------------------------------------
// Cost curves: M_eff * variance along allocation runs.

struct CurveConfig {
  std::vector<double> budgets{50, 100, 150, 200, 250};
  std::size_t reps = 25;
  std::uint64_t seed = 1;
  std::vector<bool> arms{true, false};
  std::size_t max_qubits = kDefaultMaxQubits;
  PosteriorConfig posterior;
};

struct CurveRow {
  double budget = 0.0;
  std::string arm;
  std::size_t reps = 0;
  double mean = 0.0;
  double rms_deviation = 0.0;
  std::size_t best_rep = 0, worst_rep = 0;
  double best_value = 0.0, worst_value = 0.0;
};

struct CurveResult {
  std::vector<CurveRow> rows;
  // values[arm][rep][budget]
  std::vector<std::vector<std::vector<double>>> values;
};

// Value of M_eff * variance at the last step whose M_eff does not exceed b.
inline double cost_at_budget(const std::vector<TraceRow>& trace, double b) {
  double v = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : trace) {
    if (r.m_eff() > b) break;
    v = r.m_eff() * r.realized_variance;
  }
  return v;
}

// Each repetition runs once to the largest budget and is read off at every
// budget along its trace. Both arms of a repetition share its seed.
inline CurveResult run_curve(const Observable& obs, const GroupCover& cover, const StateVector& state,
                             const CurveConfig& cfg) {
  if (cfg.budgets.empty() || cfg.reps == 0) throw InvalidInput("curve needs budgets and repetitions");
  for (std::size_t k = 1; k < cfg.budgets.size(); ++k)
    if (!(cfg.budgets[k] > cfg.budgets[k - 1])) throw InvalidInput("budgets must be strictly increasing");
  const double top = *std::max_element(cfg.budgets.begin(), cfg.budgets.end());
  CurveResult res;
  res.values.assign(cfg.arms.size(), {});
  for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      AllocationConfig ac;
      ac.budget = top;
      ac.enable_double = cfg.arms[a];
      ac.seed = derive_seed(cfg.seed, r);
      ac.max_qubits = cfg.max_qubits;
      ac.posterior = cfg.posterior;
      const auto run = run_allocation(obs, cover, state, ac);
      std::vector<double> v;
      for (double b : cfg.budgets) v.push_back(cost_at_budget(run.trace, b));
      res.values[a].push_back(std::move(v));
    }
    const std::size_t last = static_cast<std::size_t>(
        std::max_element(cfg.budgets.begin(), cfg.budgets.end()) - cfg.budgets.begin());
    std::size_t best = 0, worst = 0;
    for (std::size_t r = 1; r < cfg.reps; ++r) {
      if (res.values[a][r][last] < res.values[a][best][last]) best = r;
      if (res.values[a][r][last] > res.values[a][worst][last]) worst = r;
    }
    for (std::size_t k = 0; k < cfg.budgets.size(); ++k) {
      double s = 0.0, s2 = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < cfg.reps; ++r) {
        const double x = res.values[a][r][k];
        if (std::isnan(x)) continue;
        s += x;
        s2 += x * x;
        ++n;
      }
      CurveRow row;
      row.budget = cfg.budgets[k];
      row.arm = arm_name(cfg.arms[a]);
      row.reps = n;
      row.mean = n ? s / n : std::numeric_limits<double>::quiet_NaN();
      row.rms_deviation = n ? std::sqrt(std::max(0.0, s2 / n - row.mean * row.mean)) : 0.0;
      row.best_rep = best;
      row.worst_rep = worst;
      row.best_value = res.values[a][best][k];
      row.worst_value = res.values[a][worst][k];
      res.rows.push_back(row);
    }
  }
  return res;
}

inline CsvTable curve_table(const CurveResult& r) {
  CsvTable t;
  t.header = {"budget", "arm", "reps", "mean", "rms_deviation", "best_rep", "best_value", "worst_rep", "worst_value"};
  for (const auto& x : r.rows)
    t.rows.push_back({fmt(x.budget), x.arm, std::to_string(x.reps), fmt(x.mean), fmt(x.rms_deviation),
                      std::to_string(x.best_rep), fmt(x.best_value), std::to_string(x.worst_rep), fmt(x.worst_value)});
  return t;
}

// ---------------------------------------------------------------------------
// Calibration: z = (estimate - exact) / sqrt(variance) over repetitions.

enum class CalibrationMode {
  replay,    // one allocation per arm, outcomes resampled per repetition
  adaptive,  // a fresh adaptive allocation per repetition
};

struct CalibrationConfig {
  double budget = 250.0;
  std::size_t reps = 300;
  std::uint64_t seed = 1;
  CalibrationMode mode = CalibrationMode::replay;
  std::vector<bool> arms{true, false};
  std::size_t max_qubits = kDefaultMaxQubits;
  PosteriorConfig posterior;
};

struct CalibrationRow {
  std::string arm;
  std::size_t rep = 0;
  double estimate = 0.0;
  double variance = 0.0;
  double residual = 0.0;
  double z = 0.0;
  bool flagged = false;  // zero variance with non-zero residual
};

struct CalibrationSummary {
  std::string arm;
  std::size_t count = 0;
  std::size_t flagged = 0;
  double mean_z = 0.0;
  double rms_z = 0.0;
};

struct CalibrationResult {
  double exact = 0.0;
  std::vector<CalibrationRow> rows;
  std::vector<CalibrationSummary> summary;
};

inline CalibrationRow z_row(const std::string& arm, std::size_t rep, double est, double var, double exact) {
  CalibrationRow row{arm, rep, est, var, est - exact, 0.0, false};
  if (var > 0.0) {
    row.z = row.residual / std::sqrt(var);
  } else if (row.residual != 0.0) {
    row.flagged = true;
    row.z = row.residual > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return row;
}

inline CalibrationResult run_calibration(const Observable& obs, const GroupCover& cover, const StateVector& state,
                                         const CalibrationConfig& cfg) {
  if (cfg.reps == 0) throw InvalidInput("calibration needs repetitions");
  CalibrationResult res;
  res.exact = observable_expectation(state, obs);
  for (bool with_double : cfg.arms) {
    const std::string arm = arm_name(with_double);
    AllocationConfig ac;
    ac.budget = cfg.budget;
    ac.enable_double = with_double;
    ac.max_qubits = cfg.max_qubits;
    ac.posterior = cfg.posterior;
    std::vector<MeasurementAction> plan;
    if (cfg.mode == CalibrationMode::replay) {
      ac.seed = cfg.seed;
      plan = run_allocation(obs, cover, state, ac).actions;
    }
    CalibrationSummary sum{arm};
    double s = 0.0, s2 = 0.0;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      const std::uint64_t seed = derive_seed(cfg.seed, r);
      double est, var;
      if (cfg.mode == CalibrationMode::replay) {
        TallyLedger ledger(obs);
        Rng rng(seed);
        for (const auto& a : plan) ledger.record(sample_action(state, obs, cover, a, rng, cfg.max_qubits));
        const EstimateReport rep = estimate(ledger, obs, cfg.posterior);
        est = rep.mean;
        var = rep.variance;
      } else {
        ac.seed = seed;
        const auto run = run_allocation(obs, cover, state, ac);
        est = run.mean;
        var = run.variance;
      }
      const CalibrationRow row = z_row(arm, r, est, var, res.exact);
      if (row.flagged) {
        ++sum.flagged;
      } else {
        ++sum.count;
        s += row.z;
        s2 += row.z * row.z;
      }
      res.rows.push_back(row);
    }
    sum.mean_z = sum.count ? s / sum.count : 0.0;
    sum.rms_z = sum.count ? std::sqrt(s2 / sum.count) : 0.0;
    res.summary.push_back(sum);
  }
  return res;
}

inline CsvTable calibration_table(const CalibrationResult& r) {
  CsvTable t;
  t.header = {"arm", "rep", "estimate", "variance", "residual", "z", "flagged"};
  for (const auto& x : r.rows)
    t.rows.push_back({x.arm, std::to_string(x.rep), fmt(x.estimate), fmt(x.variance), fmt(x.residual), fmt(x.z),
                      x.flagged ? "1" : "0"});
  t.comments.push_back("# exact " + fmt(r.exact));
  for (const auto& s : r.summary)
    t.comments.push_back("# summary arm=" + s.arm + " count=" + std::to_string(s.count) + " flagged=" +
                         std::to_string(s.flagged) + " mean_z=" + fmt(s.mean_z) + " rms_z=" + fmt(s.rms_z));
  return t;
}

// ---------------------------------------------------------------------------
// Double-shot usage: mean number of double shots against shots taken.

struct DoubleUsageConfig {
  double max_shots = 300.0;
  std::size_t reps = 10;
  std::uint64_t seed = 1;
  double fit_above = 20.0;  // fit uses M > fit_above
  bool enable_double = true;
  std::size_t max_qubits = kDefaultMaxQubits;
  PosteriorConfig posterior;
};

struct DoubleUsageResult {
  std::vector<double> m;
  std::vector<double> mean_m_double;
  double slope = 0.0;
  double intercept = 0.0;
};

inline std::pair<double, double> least_squares_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) throw InvalidInput("line fit needs at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

inline DoubleUsageResult run_double_usage(const Observable& obs, const GroupCover& cover, const StateVector& state,
                                          const DoubleUsageConfig& cfg) {
  if (cfg.reps == 0 || !(cfg.max_shots >= 2.0)) throw InvalidInput("double usage needs repetitions and shots");
  const std::size_t mmax = static_cast<std::size_t>(cfg.max_shots);
  std::vector<double> acc(mmax + 1, 0.0);
  std::vector<std::size_t> hits(mmax + 1, 0);
  for (std::size_t r = 0; r < cfg.reps; ++r) {
    AllocationConfig ac;
    ac.budget = 2.0 * cfg.max_shots + 2.0;
    ac.max_shots = cfg.max_shots;
    ac.enable_double = cfg.enable_double;
    ac.seed = derive_seed(cfg.seed, r);
    ac.max_qubits = cfg.max_qubits;
    ac.posterior = cfg.posterior;
    const auto run = run_allocation(obs, cover, state, ac);
    for (const auto& row : run.trace) {
      const auto m = static_cast<std::size_t>(row.m);
      if (m <= mmax) {
        acc[m] += row.m_double;
        ++hits[m];
      }
    }
  }
  DoubleUsageResult res;
  std::vector<double> fx, fy;
  for (std::size_t m = 1; m <= mmax; ++m) {
    if (hits[m] == 0) continue;  // no run reached this many shots
    res.m.push_back(static_cast<double>(m));
    res.mean_m_double.push_back(acc[m] / static_cast<double>(hits[m]));
    if (static_cast<double>(m) > cfg.fit_above) {
      fx.push_back(static_cast<double>(m));
      fy.push_back(res.mean_m_double.back());
    }
  }
  if (fx.size() >= 2) std::tie(res.slope, res.intercept) = least_squares_line(fx, fy);
  return res;
}

inline CsvTable double_usage_table(const DoubleUsageResult& r) {
  CsvTable t;
  t.header = {"m", "mean_m_double"};
  for (std::size_t k = 0; k < r.m.size(); ++k) t.rows.push_back({fmt(r.m[k]), fmt(r.mean_m_double[k])});
  t.comments.push_back("# fit slope=" + fmt(r.slope) + " intercept=" + fmt(r.intercept));
  return t;
}

}  // namespace doublemeas
