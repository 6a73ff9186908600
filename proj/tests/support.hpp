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

// Shared test fixtures: a brute-force midpoint-grid integrator for the pair
// posterior and a fixed set of pair tallies used to compare backends.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "doublemeas/posterior.hpp"

namespace dm_test {

namespace dm = doublemeas;

// Midpoint rule on an n^3 grid over (theta_i, theta_j, rho), where the
// joint is recovered with theta_{++} = lo + rho * (hi - lo) on the feasible
// interval of theta_{++} for the given marginals. The prior is flat in these
// coordinates, so the integrand is the likelihood alone.
inline dm::PairMoments grid_pair_moments(const dm::PairTally& t, int n = 60) {
  const double h = 1.0 / n;
  std::vector<double> logw;
  std::vector<std::array<double, 4>> pts;
  std::vector<std::pair<double, double>> marg;
  logw.reserve(static_cast<std::size_t>(n) * n * n);
  double best = -std::numeric_limits<double>::infinity();
  auto xl = [](double c, double p) { return c == 0.0 ? 0.0 : c * std::log(p); };
  for (int ia = 0; ia < n; ++ia)
    for (int ib = 0; ib < n; ++ib) {
      const double a = (ia + 0.5) * h, b = (ib + 0.5) * h;
      const double lo = std::max(0.0, a + b - 1.0), hi = std::min(a, b);
      for (int ir = 0; ir < n; ++ir) {
        const double pp = lo + (ir + 0.5) * h * (hi - lo);
        const std::array<double, 4> th{pp, a - pp, b - pp, 1.0 - a - b + pp};
        const std::array<double, 4> ph{th[0] * th[0] + th[1] * th[1] + th[2] * th[2] + th[3] * th[3],
                                       2 * (th[0] * th[1] + th[2] * th[3]), 2 * (th[0] * th[2] + th[1] * th[3]),
                                       2 * (th[0] * th[3] + th[1] * th[2])};
        double lw = xl(t.s_i_indep[0], a) + xl(t.s_i_indep[1], 1 - a) + xl(t.s_j_indep[0], b) +
                    xl(t.s_j_indep[1], 1 - b);
        for (int k = 0; k < 4; ++k) lw += xl(t.s_joint[k], th[k]) + xl(t.d_joint[k], ph[k]);
        logw.push_back(lw);
        pts.push_back(th);
        marg.emplace_back(a, b);
        if (lw > best) best = lw;
      }
    }
  double z = 0;
  dm::PairMoments m{};
  m.theta_joint = {0, 0, 0, 0};
  m.phi_joint = {0, 0, 0, 0};
  m.theta_i = m.theta_j = m.theta_prod = 0;
  for (std::size_t k = 0; k < logw.size(); ++k) {
    const double w = std::exp(logw[k] - best);
    if (w == 0.0) continue;
    z += w;
    const auto& th = pts[k];
    const auto [a, b] = marg[k];
    for (int s = 0; s < 4; ++s) m.theta_joint[s] += w * th[s];
    m.phi_joint[0] += w * (th[0] * th[0] + th[1] * th[1] + th[2] * th[2] + th[3] * th[3]);
    m.phi_joint[1] += w * 2 * (th[0] * th[1] + th[2] * th[3]);
    m.phi_joint[2] += w * 2 * (th[0] * th[2] + th[1] * th[3]);
    m.phi_joint[3] += w * 2 * (th[0] * th[3] + th[1] * th[2]);
    m.theta_i += w * a;
    m.theta_j += w * b;
    m.theta_prod += w * a * b;
  }
  for (int s = 0; s < 4; ++s) {
    m.theta_joint[s] /= z;
    m.phi_joint[s] /= z;
  }
  m.theta_i /= z;
  m.theta_j /= z;
  m.theta_prod /= z;
  return m;
}

inline dm::PairTally pair_tally(std::array<double, 4> s, std::array<double, 4> d = {}, std::array<double, 2> si = {},
                                std::array<double, 2> sj = {}) {
  dm::PairTally t;
  t.s_joint = s;
  t.d_joint = d;
  t.s_i_indep = si;
  t.s_j_indep = sj;
  return t;
}

// Twenty pair tallies spanning joint, double and independent counts.
inline std::vector<dm::PairTally> validation_tallies() {
  return {
      pair_tally({3, 1, 1, 0}),
      pair_tally({1, 0, 0, 0}),
      pair_tally({0, 0, 0, 0}, {2, 1, 1, 0}),
      pair_tally({5, 2, 0, 1}),
      pair_tally({0, 3, 4, 0}),
      pair_tally({10, 0, 0, 10}),
      pair_tally({2, 2, 2, 2}, {3, 0, 0, 1}),
      pair_tally({1, 0, 0, 0}, {0, 0, 0, 0}, {4, 1}, {0, 3}),
      pair_tally({0, 0, 0, 0}, {5, 1, 1, 1}, {2, 2}, {1, 0}),
      pair_tally({8, 3, 2, 1}, {2, 1, 0, 1}),
      pair_tally({0, 0, 0, 1}, {0, 1, 1, 0}),
      pair_tally({6, 0, 0, 0}, {0, 0, 0, 0}, {0, 6}, {0, 0}),
      pair_tally({4, 4, 0, 0}, {1, 1, 1, 1}),
      pair_tally({12, 5, 3, 2}),
      pair_tally({0, 0, 0, 0}, {10, 2, 2, 0}),
      pair_tally({3, 0, 1, 6}, {0, 0, 0, 0}, {3, 3}, {5, 1}),
      pair_tally({1, 1, 1, 1}, {0, 0, 0, 0}, {10, 0}, {0, 10}),
      pair_tally({2, 7, 1, 0}, {4, 0, 2, 0}),
      pair_tally({15, 10, 8, 12}, {3, 2, 2, 3}),
      pair_tally({0, 2, 0, 0}, {6, 0, 0, 6}, {1, 1}, {1, 1}),
  };
}

}  // namespace dm_test
