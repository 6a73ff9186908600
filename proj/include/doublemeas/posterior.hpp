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
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "doublemeas/diagnostics.hpp"
#include "doublemeas/errors.hpp"
#include "doublemeas/mcmc.hpp"
#include "doublemeas/quadrature.hpp"
#include "doublemeas/rng.hpp"

namespace doublemeas {

enum class Backend { quadrature, mcmc };

inline const char* backend_name(Backend b) { return b == Backend::quadrature ? "quadrature" : "mcmc"; }

// Probability that P (x) P on two copies yields +1 when P yields +1 w.p. theta.
inline double phi_of_theta(double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw InvalidInput("theta outside [0, 1]");
  return theta * theta + (1.0 - theta) * (1.0 - theta);
}

// Joint outcome order is (++, +-, -+, --), first sign for term i.
inline std::array<double, 4> phi_joint(const std::array<double, 4>& t) {
  double s = 0.0;
  for (double v : t) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw InvalidInput("joint probability outside [0, 1]");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw InvalidInput("joint probabilities do not sum to 1");
  return {t[0] * t[0] + t[1] * t[1] + t[2] * t[2] + t[3] * t[3], 2.0 * (t[0] * t[1] + t[2] * t[3]),
          2.0 * (t[0] * t[2] + t[1] * t[3]), 2.0 * (t[0] * t[3] + t[1] * t[2])};
}

// Outcome counts for one term: s from single-copy shots, d from double shots.
struct SingleTally {
  double s_plus = 0.0, s_minus = 0.0, d_plus = 0.0, d_minus = 0.0;
};

struct SingleMoments {
  double theta = 0.5;
  double theta_sq = 1.0 / 3.0;
  double phi = 2.0 / 3.0;

  double variance() const { return theta_sq - theta * theta; }
};

// Counts for a commuting pair (i, j). Joint arrays use (++, +-, -+, --);
// indep arrays are (+, -) counts of one member measured without the other.
struct PairTally {
  std::array<double, 4> s_joint{};
  std::array<double, 4> d_joint{};
  std::array<double, 2> s_i_indep{};
  std::array<double, 2> s_j_indep{};

  bool has_joint() const {
    for (int k = 0; k < 4; ++k)
      if (s_joint[k] != 0.0 || d_joint[k] != 0.0) return true;
    return false;
  }
};

struct PairMoments {
  std::array<double, 4> theta_joint{0.25, 0.25, 0.25, 0.25};
  std::array<double, 4> phi_joint{};
  double theta_prod = 0.25;  // E[theta_i theta_j]
  double theta_i = 0.5;
  double theta_j = 0.5;

  double covariance() const { return theta_prod - theta_i * theta_j; }
};

struct PairQuadratureConfig {
  std::size_t outer_nodes = 10;
  std::size_t inner_nodes = 8;
  std::size_t inner_bins = 16;  // resolution of the fitted inner proposal
  double proxy_temper = 0.85;
  double defensive_weight = 0.2;  // share of a flat proxy mixed in when joint counts exist
  double defensive_counts = 4.0;  // effective count total of that flat proxy
  std::size_t conditional_bins = 64;      // theta_j proposal fitted given theta_i when joint counts exist; 0 skips
  std::size_t conditional_inner_bins = 8; // theta_c fit used inside that one
};

struct PosteriorConfig {
  Backend single_backend = Backend::quadrature;
  Backend pair_backend = Backend::quadrature;
  std::size_t single_nodes = 512;
  PairQuadratureConfig pair_quadrature;
  McmcConfig mcmc;
};

namespace detail {

inline void check_count(double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidInput("tally counts must be finite and non-negative");
}

inline double xlog(double count, double p) { return count == 0.0 ? 0.0 : count * std::log(p); }

// log of theta^{s+} (1-theta)^{s-} phi^{d+} (1-phi)^{d-}; `c` is 1 - theta.
inline double single_log_likelihood(const SingleTally& t, double theta, double c) {
  const double q = 2.0 * theta * c;  // 1 - phi
  return xlog(t.s_plus, theta) + xlog(t.s_minus, c) + xlog(t.d_plus, 1.0 - q) + xlog(t.d_minus, q);
}

inline std::uint64_t hash_doubles(std::uint64_t h, const double* v, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, &v[k], sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

}  // namespace detail

inline void validate(const SingleTally& t) {
  detail::check_count(t.s_plus);
  detail::check_count(t.s_minus);
  detail::check_count(t.d_plus);
  detail::check_count(t.d_minus);
}

inline void validate(const PairTally& t) {
  for (double v : t.s_joint) detail::check_count(v);
  for (double v : t.d_joint) detail::check_count(v);
  for (double v : t.s_i_indep) detail::check_count(v);
  for (double v : t.s_j_indep) detail::check_count(v);
}

// Posterior moments of one term under a flat prior on theta, by
// log-domain Gauss-Legendre quadrature.
inline SingleMoments single_moments_quadrature(const SingleTally& t, std::size_t nodes = 512) {
  validate(t);
  const GaussLegendre& g = gauss_legendre(nodes);
  const std::size_t h = g.lower.size();
  std::vector<double> lx(2 * h), th(2 * h), ww(2 * h);
  for (std::size_t k = 0; k < h; ++k) {
    th[2 * k] = g.lower[k];
    lx[2 * k] = detail::single_log_likelihood(t, g.lower[k], g.upper[k]);
    th[2 * k + 1] = g.upper[k];
    lx[2 * k + 1] = detail::single_log_likelihood(t, g.upper[k], g.lower[k]);
    ww[2 * k] = ww[2 * k + 1] = g.weight[k];
  }
  if (g.order % 2 == 1) {
    th.push_back(0.5);
    lx.push_back(detail::single_log_likelihood(t, 0.5, 0.5));
    ww.push_back(g.centre_weight);
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : lx) mx = std::max(mx, v);
  if (!std::isfinite(mx)) throw NumericalError("single-term posterior vanishes on every node");
  double z = 0.0, m1 = 0.0, m2 = 0.0, mp = 0.0;
  for (std::size_t k = 0; k < th.size(); ++k) {
    const double w = ww[k] * std::exp(lx[k] - mx);
    const double x = th[k];
    z += w;
    m1 += w * x;
    m2 += w * x * x;
    mp += w * (1.0 - 2.0 * x * (1.0 - x));
  }
  SingleMoments m;
  // Equal single-copy counts make the posterior symmetric about 1/2.
  m.theta = t.s_plus == t.s_minus ? 0.5 : m1 / z;
  m.theta_sq = m2 / z;
  m.phi = mp / z;
  return m;
}

inline SingleMoments single_moments_mcmc(const SingleTally& t, const McmcConfig& cfg, bool* in_band = nullptr) {
  validate(t);
  Rng rng(detail::hash_doubles(cfg.seed, &t.s_plus, 1) ^ detail::hash_doubles(1, &t.s_minus, 1) ^
          detail::hash_doubles(2, &t.d_plus, 1) ^ detail::hash_doubles(3, &t.d_minus, 1));
  // theta <-> 1 - theta leaves the double-shot factor unchanged.
  static const std::vector<std::array<std::size_t, 2>> kFlip = {{1, 0}};
  auto logd = [&](const std::array<double, 2>& p) { return detail::single_log_likelihood(t, p[0], p[1]); };
  const auto run = mcmc_sample<2>(logd, cfg, rng, kFlip);
  if (in_band) *in_band = run.in_band;
  // Each draw is averaged with its mirror image, weighted by density.
  SingleMoments m{0.0, 0.0, 0.0};
  for (const auto& p : run.samples) {
    const double l0 = logd(p), l1 = logd({p[1], p[0]});
    const double w0 = 1.0 / (1.0 + std::exp(l1 - l0));
    const double ph = p[0] * p[0] + p[1] * p[1];
    m.theta += w0 * p[0] + (1.0 - w0) * p[1];
    m.theta_sq += w0 * p[0] * p[0] + (1.0 - w0) * p[1] * p[1];
    m.phi += ph;
  }
  const double n = static_cast<double>(run.samples.size());
  m.theta /= n;
  m.theta_sq /= n;
  m.phi /= n;
  return m;
}

inline SingleMoments single_moments(const SingleTally& t, const PosteriorConfig& cfg = {}) {
  if (cfg.single_backend == Backend::mcmc) {
    bool ok = false;
    const SingleMoments m = single_moments_mcmc(t, cfg.mcmc, &ok);
    if (ok) return m;
    warn("single-term MCMC acceptance outside band; using quadrature");
  }
  return single_moments_quadrature(t, cfg.single_nodes);
}

// ---------------------------------------------------------------------------
// Pair posterior.
//
// Coordinates: theta_a = P(i=+1), theta_b = P(j=+1), theta_c = P(i*j=+1).
// The prior is flat in (theta_a, theta_b) and, given those, flat in theta_c
// over its feasible interval [|a+b-1|, 1-|a-b|]. With no joint counts the
// posterior therefore factorises into the two single-term posteriors.

inline constexpr std::size_t kPairFeatures = 12;  // s_joint, d_joint, s_i_indep, s_j_indep
inline constexpr std::size_t kPairValues = 11;    // t[4], phi[4], theta_i, theta_j, theta_i*theta_j

using PairFeatureVector = Eigen::Matrix<double, kPairFeatures, 1>;

inline PairFeatureVector pair_counts_vector(const PairTally& t) {
  PairFeatureVector v;
  for (int k = 0; k < 4; ++k) {
    v(k) = t.s_joint[k];
    v(4 + k) = t.d_joint[k];
  }
  v(8) = t.s_i_indep[0];
  v(9) = t.s_i_indep[1];
  v(10) = t.s_j_indep[0];
  v(11) = t.s_j_indep[1];
  return v;
}

// Weighted points representing a pair posterior. Reweighting by
// exp(features * delta) gives the posterior for the tally plus delta.
struct PairNodeSet {
  Eigen::ArrayXd log_weight;
  Eigen::Matrix<double, Eigen::Dynamic, kPairFeatures> features;
  Eigen::Matrix<double, Eigen::Dynamic, kPairValues> values;

  std::size_t size() const { return static_cast<std::size_t>(log_weight.size()); }
};

namespace detail {

inline double feasible_length(double a, double b) { return 1.0 - std::abs(a - b) - std::abs(a + b - 1.0); }

// Features and values for points (theta_a, theta_b, theta_c), vectorised.
inline void fill_pair_points(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, const Eigen::ArrayXd& c,
                             PairNodeSet& ns) {
  constexpr double tiny = 1e-300;
  const Eigen::Index n = a.size();
  ns.features.resize(n, kPairFeatures);
  ns.values.resize(n, kPairValues);
  const Eigen::ArrayXd t0 = ((a + b + c - 1.0) * 0.5).max(0.0);
  const Eigen::ArrayXd t1 = ((1.0 + a - b - c) * 0.5).max(0.0);
  const Eigen::ArrayXd t2 = ((1.0 - a + b - c) * 0.5).max(0.0);
  const Eigen::ArrayXd t3 = ((1.0 - a - b + c) * 0.5).max(0.0);
  ns.values.col(0) = t0.matrix();
  ns.values.col(1) = t1.matrix();
  ns.values.col(2) = t2.matrix();
  ns.values.col(3) = t3.matrix();
  ns.values.col(4) = (t0.square() + t1.square() + t2.square() + t3.square()).matrix();
  ns.values.col(5) = (2.0 * (t0 * t1 + t2 * t3)).matrix();
  ns.values.col(6) = (2.0 * (t0 * t2 + t1 * t3)).matrix();
  ns.values.col(7) = (2.0 * (t0 * t3 + t1 * t2)).matrix();
  ns.values.col(8) = a.matrix();
  ns.values.col(9) = b.matrix();
  ns.values.col(10) = (a * b).matrix();
  for (int k = 0; k < 8; ++k) ns.features.col(k) = ns.values.col(k).array().max(tiny).log().matrix();
  ns.features.col(8) = a.max(tiny).log().matrix();
  ns.features.col(9) = (1.0 - a).max(tiny).log().matrix();
  ns.features.col(10) = b.max(tiny).log().matrix();
  ns.features.col(11) = (1.0 - b).max(tiny).log().matrix();
}

// Marginal counts informing each coordinate: 0 -> theta_a, 1 -> theta_b, 2 -> theta_c.
inline SingleTally axis_counts(const PairTally& t, int axis) {
  const auto& s = t.s_joint;
  const auto& d = t.d_joint;
  switch (axis) {
    case 0: return {t.s_i_indep[0] + s[0] + s[1], t.s_i_indep[1] + s[2] + s[3], d[0] + d[1], d[2] + d[3]};
    case 1: return {t.s_j_indep[0] + s[0] + s[2], t.s_j_indep[1] + s[1] + s[3], d[0] + d[2], d[1] + d[3]};
    default: return {s[0] + s[3], s[1] + s[2], d[0] + d[3], d[1] + d[2]};
  }
}

}  // namespace detail

// Deterministic pair quadrature in (theta_i, theta_j, theta_c) with theta_c
// = P(ij = +). A nested rule: theta_i outer, theta_j given theta_i, theta_c
// over its feasible interval [|i + j - 1|, 1 - |i - j|] given both.
//
// The two marginal coordinates use importance rules whose proposals start as
// the tempered single-term posteriors built from the counts on that
// coordinate. They are split where the integrand has a kink: the feasible
// interval bends at j = i and j = 1 - i, which cross at 1/2. The inner rule
// is fitted to the actual conditional integrand at each (i, j): a coarse
// piecewise log-linear fit on the feasible interval is its proposal.
//
// Joint counts can pull a marginal well away from what its own counts
// suggest, since a joint outcome bounds theta_ij rather than theta_i. With
// joint counts present the theta_i proposal is therefore a mixture of the
// count proxy and a much flatter copy of it, and the theta_j proposal is
// refitted at every theta_i node to the conditional integrand, which follows
// the ridges that strongly correlated pairs put along j = i or j = 1 - i.
inline PairNodeSet pair_nodes_quadrature(const PairTally& t, const PairQuadratureConfig& qc = {}) {
  validate(t);
  const double kappa = qc.proxy_temper;
  const bool joint = t.has_joint();
  struct AxisProxy {
    LogLinearDensity density;
    std::vector<double> modes;
  };
  auto make_proxy = [&](const SingleTally& c) {
    auto ll = [&c](double x) { return detail::single_log_likelihood(c, x, 1.0 - x); };
    const LogLinearDensity sharp([&](double x) { return kappa * ll(x); });
    if (!joint) return AxisProxy{sharp, sharp.mode_separators(kModeDepth)};
    const double n = c.s_plus + c.s_minus + c.d_plus + c.d_minus;
    const double broad_temper = std::min(kappa, qc.defensive_counts / std::max(1.0, n));
    const LogLinearDensity broad([&](double x) { return broad_temper * ll(x); });
    const double ls = std::log1p(-qc.defensive_weight) - sharp.log_integral();
    const double lb = std::log(qc.defensive_weight) - broad.log_integral();
    const LogLinearDensity mix([&](double x) {
      const double u = ls + kappa * ll(x), v = lb + broad_temper * ll(x);
      const double m = std::max(u, v);
      if (!std::isfinite(m)) return m;
      return m + std::log(std::exp(u - m) + std::exp(v - m));
    });
    return AxisProxy{mix, mix.mode_separators(kModeDepth)};
  };
  // Rule on [0, 1] for one marginal axis, split at the given points.
  auto axis_rule = [&](const AxisProxy& p, std::initializer_list<double> split_at) {
    std::vector<double> cuts;
    for (double x : split_at) cuts.push_back(p.density.cdf(x));
    return importance_rule(p.density, qc.outer_nodes, 0.0, 1.0, cuts, &p.modes);
  };

  // Log of the integrand's dependence on theta_c at fixed (a, b).
  auto conditional = [&t](double a, double b, double c) {
    const double t0 = 0.5 * (a + b + c - 1.0), t1 = 0.5 * (1.0 + a - b - c);
    const double t2 = 0.5 * (1.0 - a + b - c), t3 = 0.5 * (1.0 - a - b + c);
    const double th[4] = {std::max(t0, 0.0), std::max(t1, 0.0), std::max(t2, 0.0), std::max(t3, 0.0)};
    const double ph[4] = {th[0] * th[0] + th[1] * th[1] + th[2] * th[2] + th[3] * th[3],
                          2.0 * (th[0] * th[1] + th[2] * th[3]), 2.0 * (th[0] * th[2] + th[1] * th[3]),
                          2.0 * (th[0] * th[3] + th[1] * th[2])};
    double l = 0.0;
    for (int k = 0; k < 4; ++k) l += detail::xlog(t.s_joint[k], th[k]) + detail::xlog(t.d_joint[k], ph[k]);
    return l;
  };
  const bool flat_inner = !joint;
  const PairFeatureVector counts = pair_counts_vector(t);

  const AxisProxy proxy_a = make_proxy(detail::axis_counts(t, 0));
  const AxisProxy proxy_b = make_proxy(detail::axis_counts(t, 1));
  std::vector<double> gx, gw;
  gauss_legendre(qc.inner_nodes).full(gx, gw);
  std::vector<double> pa, pb, pc, lw;
  const SingleTally b_own{t.s_j_indep[0], t.s_j_indep[1], 0.0, 0.0};
  // Unnormalised density of theta_j given theta_i: its own counts times the
  // theta_c integral, the latter from a coarse fit.
  auto log_b_given_a = [&](double a, double b) {
    const double lo = std::abs(a + b - 1.0), hi = 1.0 - std::abs(a - b);
    if (!(hi - lo > 1e-14)) return -std::numeric_limits<double>::infinity();
    const LogLinearDensity inner([&](double c) { return conditional(a, b, c); }, lo, hi, qc.conditional_inner_bins);
    return detail::single_log_likelihood(b_own, b, 1.0 - b) + inner.log_integral() - std::log(hi - lo);
  };
  const AxisRule ra = axis_rule(proxy_a, {0.5});
  for (std::size_t ka = 0; ka < ra.node.size(); ++ka) {
    const double a = ra.node[ka];
    AxisRule rb;
    if (joint && qc.conditional_bins > 0) {
      const LogLinearDensity cond_b([&](double b) { return log_b_given_a(a, b); }, 0.0, 1.0, qc.conditional_bins);
      rb = axis_rule(AxisProxy{cond_b, cond_b.mode_separators(kModeDepth)}, {a, 1.0 - a, 0.5});
    } else {
      rb = axis_rule(proxy_b, {a, 1.0 - a, 0.5});
    }
    for (std::size_t kb = 0; kb < rb.node.size(); ++kb) {
      const double b = rb.node[kb];
      const double lo = std::abs(a + b - 1.0), hi = 1.0 - std::abs(a - b);
      const double len = hi - lo;
      if (!(len > 1e-14)) continue;
      const double wab = ra.weight[ka] * rb.weight[kb] / len;
      if (!(wab > 0.0)) continue;
      auto push = [&](double c, double w) {
        if (!(w > 0.0)) return;
        pa.push_back(a);
        pb.push_back(b);
        pc.push_back(std::clamp(c, lo, hi));
        lw.push_back(wab * w);
      };
      if (flat_inner) {
        for (std::size_t k = 0; k < gx.size(); ++k) push(lo + len * gx[k], len * gw[k]);
        continue;
      }
      const LogLinearDensity fit([&](double c) { return conditional(a, b, c); }, lo, hi, qc.inner_bins);
      const AxisRule rc = importance_rule(fit, qc.inner_nodes);
      for (std::size_t k = 0; k < rc.node.size(); ++k) push(rc.node[k], rc.weight[k]);
    }
  }
  if (lw.empty()) throw NumericalError("pair quadrature produced no nodes");
  const Eigen::Index n = static_cast<Eigen::Index>(lw.size());
  PairNodeSet ns;
  detail::fill_pair_points(Eigen::Map<Eigen::ArrayXd>(pa.data(), n), Eigen::Map<Eigen::ArrayXd>(pb.data(), n),
                           Eigen::Map<Eigen::ArrayXd>(pc.data(), n), ns);
  ns.log_weight = Eigen::Map<Eigen::ArrayXd>(lw.data(), n).log() + (ns.features * counts).array();
  const double mx = ns.log_weight.maxCoeff();
  if (!std::isfinite(mx)) throw NumericalError("pair posterior vanishes on every node");
  ns.log_weight -= mx;
  return ns;
}

inline double pair_log_density(const PairTally& t, const std::array<double, 4>& p) {
  const double a = p[0] + p[1], b = p[0] + p[2];
  const double len = detail::feasible_length(a, b);
  if (!(len > 0.0)) return -std::numeric_limits<double>::infinity();
  const auto ph = std::array<double, 4>{p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3],
                                        2.0 * (p[0] * p[1] + p[2] * p[3]), 2.0 * (p[0] * p[2] + p[1] * p[3]),
                                        2.0 * (p[0] * p[3] + p[1] * p[2])};
  double l = -std::log(len);
  for (int k = 0; k < 4; ++k) l += detail::xlog(t.s_joint[k], p[k]) + detail::xlog(t.d_joint[k], ph[k]);
  l += detail::xlog(t.s_i_indep[0], a) + detail::xlog(t.s_i_indep[1], 1.0 - a);
  l += detail::xlog(t.s_j_indep[0], b) + detail::xlog(t.s_j_indep[1], 1.0 - b);
  return l;
}

// MCMC draws as a node set. Each draw is expanded to its orbit under the
// sign flips of i and j, weighted in proportion to the density at each image.
// Flips preserve volume on the simplex, so the orbit average has the same
// expectation as the draw itself (also after reweighting by extra counts)
// and much lower variance when the density is nearly flip-symmetric.
// Returns false when the chain's acceptance left the band.
inline bool pair_nodes_mcmc(const PairTally& t, const McmcConfig& cfg, PairNodeSet& ns) {
  validate(t);
  const PairFeatureVector counts = pair_counts_vector(t);
  Rng rng(detail::hash_doubles(cfg.seed, counts.data(), kPairFeatures));
  // Flipping the sign of i, of j, or of both leaves the double-shot factor
  // unchanged; these moves connect its mirror-image modes.
  static const std::vector<std::array<std::size_t, 4>> kFlips = {{2, 3, 0, 1}, {1, 0, 3, 2}, {3, 2, 1, 0}};
  const auto run =
      mcmc_sample<4>([&](const std::array<double, 4>& p) { return pair_log_density(t, p); }, cfg, rng, kFlips);
  constexpr std::size_t kOrbit = 4;
  const Eigen::Index n = static_cast<Eigen::Index>(run.samples.size() * kOrbit);
  Eigen::ArrayXd a(n), b(n), c(n), lw(n);
  Eigen::Index r = 0;
  for (const auto& p : run.samples) {
    std::array<std::array<double, 4>, kOrbit> images{p, p, p, p};
    for (std::size_t g = 1; g < kOrbit; ++g)
      for (std::size_t k = 0; k < 4; ++k) images[g][k] = p[kFlips[g - 1][k]];
    std::array<double, kOrbit> ld{};
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < kOrbit; ++g) {
      ld[g] = pair_log_density(t, images[g]);
      mx = std::max(mx, ld[g]);
    }
    double z = 0.0;
    for (double v : ld) z += std::exp(v - mx);
    for (std::size_t g = 0; g < kOrbit; ++g, ++r) {
      const auto& q = images[g];
      a(r) = q[0] + q[1];
      b(r) = q[0] + q[2];
      c(r) = q[0] + q[3];
      lw(r) = ld[g] - mx - std::log(z);
    }
  }
  detail::fill_pair_points(a, b, c, ns);
  ns.log_weight = lw;
  return run.in_band;
}

inline PairNodeSet pair_nodes(const PairTally& t, const PosteriorConfig& cfg = {}) {
  if (cfg.pair_backend == Backend::mcmc) {
    PairNodeSet ns;
    if (pair_nodes_mcmc(t, cfg.mcmc, ns)) return ns;
    warn("pair MCMC acceptance outside band; using quadrature");
  }
  return pair_nodes_quadrature(t, cfg.pair_quadrature);
}

// Moments of the node set's posterior after adding `delta` counts.
inline PairMoments pair_moments_from_nodes(const PairNodeSet& ns,
                                           const PairFeatureVector& delta = PairFeatureVector::Zero()) {
  Eigen::ArrayXd lw = ns.log_weight;
  if (!delta.isZero()) lw += (ns.features * delta).array();
  const double mx = lw.maxCoeff();
  if (!std::isfinite(mx)) throw NumericalError("reweighted pair posterior vanishes");
  const Eigen::VectorXd w = (lw - mx).exp().matrix();
  const double z = w.sum();
  const Eigen::Matrix<double, kPairValues, 1> v = ns.values.transpose() * w / z;
  PairMoments m;
  for (int k = 0; k < 4; ++k) {
    m.theta_joint[k] = v(k);
    m.phi_joint[k] = v(4 + k);
  }
  m.theta_i = v(8);
  m.theta_j = v(9);
  m.theta_prod = v(10);
  return m;
}

inline PairMoments pair_moments(const PairTally& t, const PosteriorConfig& cfg = {}) {
  PairMoments m = pair_moments_from_nodes(pair_nodes(t, cfg));
  if (!t.has_joint()) {
    // Exact factorisation: the marginals are the single-term posteriors.
    PosteriorConfig single = cfg;
    single.single_backend = Backend::quadrature;
    m.theta_i = single_moments(SingleTally{t.s_i_indep[0], t.s_i_indep[1], 0, 0}, single).theta;
    m.theta_j = single_moments(SingleTally{t.s_j_indep[0], t.s_j_indep[1], 0, 0}, single).theta;
    m.theta_prod = m.theta_i * m.theta_j;
  }
  return m;
}

}  // namespace doublemeas
