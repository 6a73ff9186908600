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
#include <map>
#include <mutex>
#include <vector>

namespace doublemeas {

// Gauss-Legendre rule on [0, 1]. `lower[k]` and `upper[k]` are mirror nodes
// x and 1-x, both computed directly so each is accurate near its endpoint.
struct GaussLegendre {
  std::vector<double> lower, upper, weight;  // half-rules; weight applies to both mirrors
  double centre_weight = 0.0;                // non-zero only for odd orders
  std::size_t order = 0;

  // Full rule as plain arrays, ascending.
  void full(std::vector<double>& x, std::vector<double>& w) const {
    x.clear();
    w.clear();
    for (std::size_t k = 0; k < lower.size(); ++k) {
      x.push_back(lower[k]);
      w.push_back(weight[k]);
    }
    if (order % 2 == 1) {
      x.push_back(0.5);
      w.push_back(centre_weight);
    }
    for (std::size_t k = lower.size(); k-- > 0;) {
      x.push_back(upper[k]);
      w.push_back(weight[k]);
    }
  }
};

inline GaussLegendre make_gauss_legendre(std::size_t n) {
  GaussLegendre g;
  g.order = n;
  const std::size_t half = n / 2;
  for (std::size_t i = 0; i < half; ++i) {
    // i-th largest root r of P_n on [-1, 1].
    double r = std::cos(M_PI * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = r;
      for (std::size_t k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * r * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(n) * (r * p1 - p0) / (r * r - 1.0);
      const double step = p1 / dp;
      r -= step;
      if (std::abs(step) < 1e-16) break;
    }
    double p0 = 1.0, p1 = r;
    for (std::size_t k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * r * p1 - (k - 1.0) * p0) / static_cast<double>(k);
      p0 = p1;
      p1 = p2;
    }
    dp = static_cast<double>(n) * (r * p1 - p0) / (r * r - 1.0);
    const double w = 1.0 / ((1.0 - r * r) * dp * dp);  // half of the [-1,1] weight
    g.lower.push_back((1.0 - r) / 2.0);
    g.upper.push_back((1.0 + r) / 2.0);
    g.weight.push_back(w);
  }
  std::reverse(g.lower.begin(), g.lower.end());
  std::reverse(g.upper.begin(), g.upper.end());
  std::reverse(g.weight.begin(), g.weight.end());
  if (n % 2 == 1) {
    double sum = 0.0;
    for (double w : g.weight) sum += 2.0 * w;
    g.centre_weight = 1.0 - sum;
  }
  return g;
}

inline const GaussLegendre& gauss_legendre(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, GaussLegendre> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_gauss_legendre(n)).first;
  return it->second;
}

// A normalised density on [lo, hi] whose logarithm is piecewise linear on a
// grid clustered at both ends. Supports exact cdf, inverse cdf and pdf, so it
// can serve as an importance proposal.
class LogLinearDensity {
 public:
  static constexpr std::size_t kBins = 256;
  static constexpr double kFloor = -700.0;

  template <class LogF>
  explicit LogLinearDensity(LogF&& logf, double lo = 0.0, double hi = 1.0, std::size_t bins = kBins)
      : bins_(std::max<std::size_t>(bins, 1)), lo_(lo), hi_(hi) {
    grid_.resize(bins_ + 1);
    logf_.resize(bins_ + 1);
    for (std::size_t k = 0; k <= bins_; ++k) {
      // Half-angle form keeps grid points near the upper end accurate.
      const double s = std::sin(M_PI * static_cast<double>(k) / (2.0 * static_cast<double>(bins_)));
      grid_[k] = lo + (hi - lo) * s * s;
      logf_[k] = logf(grid_[k]);
    }
    grid_[0] = lo;
    grid_[bins_] = hi;
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logf_)
      if (std::isfinite(v)) mx = std::max(mx, v);
    if (!std::isfinite(mx)) mx = 0.0;
    for (double& v : logf_) v = std::isfinite(v) ? std::max(v - mx, kFloor) : kFloor;
    cum_.assign(bins_ + 1, 0.0);
    for (std::size_t k = 0; k < bins_; ++k) cum_[k + 1] = cum_[k] + bin_mass(k, 1.0);
    total_ = cum_[bins_];
    log_total_ = std::log(total_);
    log_scale_ = mx;
    for (double& c : cum_) c /= total_;
    cum_[bins_] = 1.0;

    double z = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k <= bins_; ++k) {
      const double h = (k > 0 ? grid_[k] - grid_[k - 1] : 0.0) + (k < bins_ ? grid_[k + 1] - grid_[k] : 0.0);
      const double w = 0.5 * h * std::exp(logf_[k]);
      z += w;
      m1 += w * grid_[k];
      m2 += w * grid_[k] * grid_[k];
    }
    mean_ = m1 / z;
    sd_ = std::sqrt(std::max(0.0, m2 / z - mean_ * mean_));
  }

  // Log of the integral of exp(logf) over [lo, hi], as approximated.
  double log_integral() const { return log_scale_ + log_total_; }

  double mean() const { return mean_; }
  double sd() const { return sd_; }

  double cdf(double x) const {
    if (x <= lo_) return 0.0;
    if (x >= hi_) return 1.0;
    const std::size_t k = bin_of(x);
    const double h = grid_[k + 1] - grid_[k];
    return cum_[k] + bin_mass(k, (x - grid_[k]) / h) / total_;
  }

  // Returns x with cdf(x) = u; `log_pdf` receives the normalised log density at x.
  double inverse_cdf(double u, double& log_pdf) const {
    u = std::clamp(u, 0.0, 1.0);
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), u) - cum_.begin());
    k = k == 0 ? 0 : k - 1;
    if (k >= bins_) k = bins_ - 1;
    while (k + 1 < bins_ && cum_[k + 1] - cum_[k] <= 0.0 && cum_[k + 1] < u) ++k;
    const double bin = cum_[k + 1] - cum_[k];
    const double r = bin > 0.0 ? std::clamp((u - cum_[k]) / bin, 0.0, 1.0) : 0.5;
    const double d = logf_[k + 1] - logf_[k];
    double s;
    if (std::abs(d) < 1e-9) {
      s = r;
    } else if (d > 0.0) {
      s = 1.0 + std::log(r + (1.0 - r) * std::exp(-d)) / d;
    } else {
      s = std::log1p(r * std::expm1(d)) / d;
    }
    s = std::clamp(s, 0.0, 1.0);
    const double h = grid_[k + 1] - grid_[k];
    log_pdf = logf_[k] + d * s - log_total_;
    return grid_[k] + s * h;
  }

  double log_pdf(double x) const {
    const std::size_t k = bin_of(std::clamp(x, lo_, hi_));
    const double h = grid_[k + 1] - grid_[k];
    const double s = std::clamp((x - grid_[k]) / h, 0.0, 1.0);
    return logf_[k] + (logf_[k + 1] - logf_[k]) * s - log_total_;
  }

  // Cdf values at density minima that separate modes by at least `depth`
  // nats on both sides, deepest first.
  std::vector<double> mode_separators(double depth) const {
    std::vector<std::pair<double, double>> found;  // (depth, u)
    std::vector<double> left(bins_ + 1), right(bins_ + 1);
    left[0] = logf_[0];
    for (std::size_t k = 1; k <= bins_; ++k) left[k] = std::max(left[k - 1], logf_[k]);
    right[bins_] = logf_[bins_];
    for (std::size_t k = bins_; k-- > 0;) right[k] = std::max(right[k + 1], logf_[k]);
    for (std::size_t k = 1; k < bins_; ++k) {
      if (logf_[k] > logf_[k - 1] || logf_[k] > logf_[k + 1]) continue;
      const double dd = std::min(left[k], right[k]) - logf_[k];
      if (dd >= depth && cum_[k] > 1e-6 && cum_[k] < 1.0 - 1e-6) found.emplace_back(dd, cum_[k]);
    }
    std::sort(found.begin(), found.end(), [](auto& a, auto& b) { return a.first > b.first; });
    std::vector<double> u;
    for (auto& f : found) {
      bool close = false;
      for (double v : u) close = close || std::abs(v - f.second) < 1e-3;
      if (!close) u.push_back(f.second);
    }
    return u;
  }

 private:
  std::size_t bin_of(double x) const {
    std::size_t k = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), x) - grid_.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, bins_ - 1);
  }

  // Unnormalised mass of bin k over its first fraction s in [0, 1].
  double bin_mass(std::size_t k, double s) const {
    const double h = grid_[k + 1] - grid_[k];
    const double d = logf_[k + 1] - logf_[k];
    const double e0 = std::exp(logf_[k]);
    if (std::abs(d * s) < 1e-9) return h * s * e0 * (1.0 + 0.5 * d * s);
    return h * (std::exp(logf_[k] + d * s) - e0) / d;
  }

  std::size_t bins_;
  double lo_, hi_;
  std::vector<double> grid_, logf_, cum_;
  double total_ = 1.0, log_total_ = 0.0, log_scale_ = 0.0, mean_ = 0.5, sd_ = 0.0;
};

// Importance rule on [0, 1] driven by a proposal density: nodes are proposal
// quantiles at Gauss-Legendre points in cdf space, split at mode separators
// and at any extra cdf cuts (kinks of the integrand). Restricted to the cdf
// range [u_lo, u_hi].
// weight[k] * g(node[k]) summed approximates the integral of g over the range.
struct AxisRule {
  std::vector<double> node, weight;
};

inline constexpr double kModeDepth = 4.0;

// `modes` are the proposal's mode separators when already known; otherwise
// they are computed here.
inline AxisRule importance_rule(const LogLinearDensity& proposal, std::size_t n, double u_lo = 0.0,
                                double u_hi = 1.0, const std::vector<double>& extra_cuts = {},
                                const std::vector<double>* modes = nullptr) {
  std::vector<double> cuts{u_lo, u_hi};
  const std::vector<double> own = modes ? std::vector<double>{} : proposal.mode_separators(kModeDepth);
  int used = 0;
  for (double u : modes ? *modes : own)
    if (u > u_lo + 1e-9 && u < u_hi - 1e-9 && used < 2) {
      cuts.push_back(u);
      ++used;
    }
  for (double u : extra_cuts)
    if (u > u_lo + 1e-12 && u < u_hi - 1e-12) cuts.push_back(u);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return b - a < 1e-12; }), cuts.end());
  if (cuts.size() < 2) cuts = {u_lo, u_hi};
  const std::size_t segs = cuts.size() - 1;
  const double span = u_hi - u_lo;
  AxisRule rule;
  for (std::size_t s = 0; s < segs; ++s) {
    const double a = cuts[s], len = cuts[s + 1] - cuts[s];
    if (!(len > 0.0)) continue;
    const std::size_t m = std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(len / span * n)));
    std::vector<double> x, w;
    gauss_legendre(m).full(x, w);
    for (std::size_t k = 0; k < x.size(); ++k) {
      double lp = 0.0;
      const double t = proposal.inverse_cdf(a + len * x[k], lp);
      rule.node.push_back(t);
      rule.weight.push_back(len * w[k] * std::exp(-lp));
    }
  }
  return rule;
}

}  // namespace doublemeas
