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

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "doublemeas/errors.hpp"
#include "doublemeas/rng.hpp"

namespace doublemeas {

struct McmcConfig {
  std::size_t burn_in = 2000;
  std::size_t samples = 20000;
  double accept_low = 0.2;
  double accept_high = 0.5;
  double relabel_probability = 0.1;       // share of iterations spent on relabelling moves
  double independence_probability = 0.5;  // share of sampling iterations drawing from the fitted proposal
  std::uint64_t seed = 0x6d636d63ULL;
};

template <std::size_t K>
struct McmcRun {
  std::vector<std::array<double, K>> samples;  // points on the (K-1)-simplex
  double acceptance = 0.0;                     // random-walk moves, sampling phase
  double relabel_acceptance = 0.0;
  double independence_acceptance = 0.0;
  double step = 0.0;
  bool in_band = false;
};

namespace detail {

// Additive logistic map R^{K-1} -> simplex, t_K = 1 / (1 + sum exp(y)).
template <std::size_t K>
std::array<double, K> to_simplex(const Eigen::Matrix<double, K - 1, 1>& y) {
  std::array<double, K> t{};
  double mx = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) mx = std::max(mx, y(k));
  double s = std::exp(-mx);
  for (std::size_t k = 0; k + 1 < K; ++k) s += std::exp(y(k) - mx);
  for (std::size_t k = 0; k + 1 < K; ++k) t[k] = std::exp(y(k) - mx) / s;
  t[K - 1] = std::exp(-mx) / s;
  return t;
}

}  // namespace detail

// Random-walk Metropolis on the simplex in additive-logistic coordinates,
// including the log-Jacobian sum_k log t_k. Burn-in tunes a scalar step
// toward the acceptance band and learns the proposal covariance; both are
// frozen while sampling.
//
// `relabels` lists coordinate permutations, each its own inverse. When given,
// a share of iterations proposes t -> t[perm] instead of a random-walk step,
// which lets the chain cross between mirror-image modes of densities that are
// (nearly) invariant under those permutations.
//
// While sampling, a further share of iterations are independence proposals
// from a Student-t (4 degrees of freedom) fitted to the burn-in draws with
// its scale widened by 1.5. Near-Gaussian targets then mix much faster than
// under the walk alone.
template <std::size_t K, class LogDensity>
McmcRun<K> mcmc_sample(LogDensity&& logdensity, const McmcConfig& cfg, Rng& rng,
                       const std::vector<std::array<std::size_t, K>>& relabels = {}) {
  static_assert(K >= 2);
  constexpr int D = static_cast<int>(K) - 1;
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;

  auto target = [&](const Vec& y) {
    const auto t = detail::to_simplex<K>(y);
    double lj = 0.0;
    for (double v : t) {
      if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
      lj += std::log(v);
    }
    const double l = logdensity(t);
    return std::isnan(l) ? -std::numeric_limits<double>::infinity() : l + lj;
  };

  Vec y = Vec::Zero();
  double ly = target(y);
  if (!std::isfinite(ly)) throw NumericalError("MCMC start point has zero density");

  Mat chol = Mat::Identity();
  double step = 2.4 / std::sqrt(static_cast<double>(D));
  std::size_t accepted = 0, window_acc = 0, window = 0;
  Vec mean = Vec::Zero();
  Mat m2 = Mat::Zero();
  std::size_t nstat = 0;

  std::size_t relabel_tries = 0, relabel_acc = 0;
  auto relabel = [&]() {
    const auto t = detail::to_simplex<K>(y);
    const auto& perm = relabels[static_cast<std::size_t>(rng.uniform() * relabels.size()) % relabels.size()];
    Vec cand;
    for (int k = 0; k < D; ++k) cand(k) = std::log(t[perm[k]]) - std::log(t[perm[K - 1]]);
    const double lc = target(cand);
    ++relabel_tries;
    if (std::isfinite(lc) && std::log(std::max(rng.uniform(), 1e-300)) < lc - ly) {
      y = cand;
      ly = lc;
      ++relabel_acc;
    }
  };
  enum class Move { walk, relabel, independence };
  bool fitted = false;
  auto next_move = [&](bool sampling) {
    const double u = rng.uniform();
    if (!relabels.empty() && u < cfg.relabel_probability) return Move::relabel;
    if (sampling && fitted && u < cfg.relabel_probability + cfg.independence_probability) return Move::independence;
    return Move::walk;
  };

  constexpr double kDof = 4.0;
  Vec fit_mean = Vec::Zero();
  Mat fit_chol = Mat::Identity();
  auto fit_log_q = [&](const Vec& x) {
    const Vec r = fit_chol.template triangularView<Eigen::Lower>().solve(x - fit_mean);
    return -0.5 * (kDof + D) * std::log1p(r.squaredNorm() / kDof);
  };
  double lq_y = 0.0;
  std::size_t indep_tries = 0, indep_acc = 0;
  auto independence = [&]() {
    Vec z;
    for (int k = 0; k < D; ++k) z(k) = rng.normal();
    double chi2 = 0.0;
    for (int k = 0; k < static_cast<int>(kDof); ++k) {
      const double g = rng.normal();
      chi2 += g * g;
    }
    const Vec cand = fit_mean + fit_chol * z / std::sqrt(std::max(chi2, 1e-300) / kDof);
    const double lc = target(cand), lq_c = fit_log_q(cand);
    ++indep_tries;
    if (std::isfinite(lc) && std::log(std::max(rng.uniform(), 1e-300)) < (lc - lq_c) - (ly - lq_y)) {
      y = cand;
      ly = lc;
      ++indep_acc;
    }
  };

  auto propose = [&]() {
    Vec z;
    for (int k = 0; k < D; ++k) z(k) = rng.normal();
    const Vec cand = y + step * (chol * z);
    const double lc = target(cand);
    const bool acc = std::isfinite(lc) && std::log(std::max(rng.uniform(), 1e-300)) < lc - ly;
    if (acc) {
      y = cand;
      ly = lc;
    }
    return acc;
  };

  for (std::size_t it = 0; it < cfg.burn_in; ++it) {
    if (next_move(false) == Move::relabel) {
      relabel();
      continue;
    }
    window_acc += propose() ? 1 : 0;
    ++window;
    if (it >= cfg.burn_in / 4) {
      ++nstat;
      const Vec dlt = y - mean;
      mean += dlt / static_cast<double>(nstat);
      m2 += dlt * (y - mean).transpose();
    }
    if (it + 1 == cfg.burn_in / 2 && nstat > 10 * K) {
      Mat cov = m2 / static_cast<double>(nstat - 1) + 1e-8 * Mat::Identity();
      Eigen::LLT<Mat> llt(cov);
      if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
        step = 2.4 / std::sqrt(static_cast<double>(D));
      }
    }
    if (window == 100) {
      const double rate = static_cast<double>(window_acc) / 100.0;
      const double target_rate = 0.5 * (cfg.accept_low + cfg.accept_high);
      if (rate < cfg.accept_low || rate > cfg.accept_high) step *= std::exp(rate - target_rate) * (rate < cfg.accept_low ? 0.7 : 1.3);
      window = window_acc = 0;
    }
  }

  if (cfg.independence_probability > 0.0 && nstat > 10 * K) {
    Eigen::LLT<Mat> llt(2.25 * (m2 / static_cast<double>(nstat - 1)) + 1e-8 * Mat::Identity());
    if (llt.info() == Eigen::Success) {
      fit_mean = mean;
      fit_chol = llt.matrixL();
      fitted = true;
    }
  }

  McmcRun<K> run;
  run.samples.reserve(cfg.samples);
  std::size_t walks = 0;
  relabel_tries = relabel_acc = 0;
  for (std::size_t it = 0; it < cfg.samples; ++it) {
    switch (next_move(true)) {
      case Move::relabel: relabel(); break;
      case Move::independence:
        lq_y = fit_log_q(y);
        independence();
        break;
      case Move::walk:
        ++walks;
        accepted += propose() ? 1 : 0;
        break;
    }
    run.samples.push_back(detail::to_simplex<K>(y));
  }
  if (walks > 0 && accepted == 0 && relabel_acc == 0 && indep_acc == 0) throw NumericalError("MCMC chain rejected every proposal");
  run.acceptance = walks ? static_cast<double>(accepted) / static_cast<double>(walks) : 0.0;
  run.relabel_acceptance = relabel_tries ? static_cast<double>(relabel_acc) / static_cast<double>(relabel_tries) : 0.0;
  run.independence_acceptance = indep_tries ? static_cast<double>(indep_acc) / static_cast<double>(indep_tries) : 0.0;
  run.step = step;
  run.in_band = run.acceptance >= cfg.accept_low && run.acceptance <= cfg.accept_high;
  return run;
}

}  // namespace doublemeas
