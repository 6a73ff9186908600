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
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "doublemeas/errors.hpp"
#include "doublemeas/pauli.hpp"
#include "doublemeas/rng.hpp"

namespace doublemeas {

// Bundled observables. Each text is byte-identical to the file of the same
// name under data/.
struct BuiltinObservable {
  std::string_view name;
  std::string_view file;
  std::string_view text;
};

inline const std::vector<BuiltinObservable>& builtin_observables() {
  static const std::vector<BuiltinObservable> all = {
      {"ising-1x2", "ising_1x2.txt", R"obs(# Perturbed Ising model, periodic 1x2 lattice, 2 qubits, 15 terms.
-0.005 XI
-0.044 YI
1.028 ZI
0.198 IX
-0.053 IY
1.100 IZ
0.121 XX
-0.022 XY
-0.104 XZ
-0.022 YX
0.034 YY
-0.143 YZ
-0.104 ZX
-0.143 ZY
0.416 ZZ
)obs"},
      {"ising-2x2", "ising_2x2.txt", R"obs(# Perturbed Ising model, periodic 2x2 lattice, 4 qubits, 48 terms.
# Edge couplings are symmetric (ZIYI equals YIZI).
-0.005 XIII
-0.044 YIII
1.028 ZIII
0.198 IXII
-0.053 IYII
1.100 IZII
-0.144 IIXI
0.161 IIYI
0.893 IIZI
-0.090 IIIX
0.110 IIIY
0.805 IIIZ
0.033 XIXI
0.014 XIYI
0.067 XIZI
0.014 YIXI
-0.028 YIYI
-0.162 YIZI
0.413 ZIZI
-0.154 XYII
-0.154 YXII
0.027 YZII
0.027 ZYII
-0.076 IXIX
-0.071 IXIY
-0.096 IXIZ
-0.071 IYIX
-0.055 IYIY
-0.039 IYIZ
-0.096 IZIX
-0.039 IZIY
0.515 IZIZ
-0.059 IIXX
-0.063 IIXY
0.101 IIXZ
-0.063 IIYX
-0.126 IIYY
0.054 IIYZ
0.101 IIZX
0.054 IIZY
0.645 IIZZ
0.067 ZIXI
-0.162 ZIYI
-0.149 XXII
-0.060 XZII
-0.116 YYII
-0.060 ZXII
0.429 ZZII
)obs"},
      {"ising-2x3", "ising_2x3.txt", R"obs(# Perturbed Ising model, periodic 2x3 lattice, 6 qubits, 99 terms.
-0.005 XIIIII
-0.044 YIIIII
1.028 ZIIIII
0.198 IXIIII
-0.053 IYIIII
1.100 IZIIII
-0.144 IIXIII
0.161 IIYIII
0.893 IIZIII
-0.090 IIIXII
0.110 IIIYII
0.805 IIIZII
0.061 IIIIXI
-0.007 IIIIYI
0.950 IIIIZI
0.013 IIIIIX
-0.264 IIIIIY
0.876 IIIIIZ
-0.076 XIIXII
-0.071 XIIYII
-0.096 XIIZII
-0.071 YIIXII
-0.055 YIIYII
-0.039 YIIZII
-0.096 ZIIXII
-0.039 ZIIYII
0.515 ZIIZII
-0.059 XXIIII
-0.063 XYIIII
0.101 XZIIII
-0.063 YXIIII
-0.126 YYIIII
0.054 YZIIII
0.101 ZXIIII
0.054 ZYIIII
0.645 ZZIIII
-0.003 XIXIII
-0.001 XIYIII
-0.121 XIZIII
-0.001 YIXIII
-0.059 YIYIII
-0.042 YIZIII
-0.121 ZIXIII
-0.042 ZIYIII
0.569 ZIZIII
0.094 IXIIXI
-0.144 IXIIYI
0.004 IXIIZI
-0.144 IYIIXI
-0.138 IYIIYI
0.136 IYIIZI
0.004 IZIIXI
0.136 IZIIYI
0.559 IZIIZI
0.122 IXXIII
0.055 IXYIII
0.156 IXZIII
0.055 IYXIII
0.127 IYYIII
0.087 IYZIII
0.156 IZXIII
0.087 IZYIII
0.584 IZZIII
0.034 IIXIIX
0.118 IIXIIY
0.071 IIXIIZ
0.118 IIYIIX
0.001 IIYIIY
0.12 IIYIIZ
0.071 IIZIIX
0.12 IIZIIY
0.539 IIZIIZ
0.078 IIIXXI
0.06 IIIXYI
0.068 IIIXZI
0.06 IIIYXI
0.064 IIIYYI
0.067 IIIYZI
0.068 IIIZXI
0.067 IIIZYI
0.437 IIIZZI
0.061 IIIXIX
0.111 IIIXIY
0.076 IIIXIZ
0.111 IIIYIX
0.169 IIIYIY
0.03 IIIYIZ
0.076 IIIZIX
0.03 IIIZIY
0.484 IIIZIZ
0.152 IIIIXX
0.038 IIIIXY
0.011 IIIIXZ
0.038 IIIIYX
0.146 IIIIYY
0.012 IIIIYZ
0.011 IIIIZX
0.012 IIIIZY
0.601 IIIIZZ
)obs"},
      {"toy-fig1", "toy_fig1.txt", R"obs(# Five-term two-qubit example used to illustrate greedy grouping.
1 IX
1 XI
1 XX
1 YY
1 ZZ
)obs"},
  };
  return all;
}

inline const BuiltinObservable& builtin(std::string_view name) {
  for (const auto& b : builtin_observables())
    if (b.name == name) return b;
  throw InvalidInput("unknown builtin observable '" + std::string(name) + "'");
}

// Vertices of an nx-by-ny periodic lattice are numbered v = x * ny + y;
// each undirected edge appears once, lower vertex first, sorted.
inline std::vector<std::pair<std::size_t, std::size_t>> periodic_lattice_edges(std::size_t nx, std::size_t ny) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  auto add = [&](std::size_t a, std::size_t b) {
    if (a == b) return;
    if (a > b) std::swap(a, b);
    for (const auto& e : edges)
      if (e.first == a && e.second == b) return;
    edges.emplace_back(a, b);
  };
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      const std::size_t v = x * ny + y;
      add(v, ((x + 1) % nx) * ny + y);
      add(v, x * ny + (y + 1) % ny);
    }
  std::sort(edges.begin(), edges.end());
  return edges;
}

// Coefficients of a perturbed Ising model
//   sum_v B_v Z_v + sum_v sum_a b_{v,a} a_v
//   + sum_{(u,v)} J_uv Z_u Z_v + sum_{(u,v)} sum_{a,b != (Z,Z)} j_{uv,ab} a_u b_v
// where a, b range over {X, Y, Z}. `field` holds B, `perturb` the b terms
// (X, Y per vertex), `coupling` J and `edge_perturb` the 8 remaining
// two-site terms per edge in XX, XY, XZ, YX, YY, YZ, ZX, ZY order.
struct IsingCoefficients {
  std::vector<double> field;
  std::vector<std::array<double, 2>> perturb;
  std::vector<double> coupling;
  std::vector<std::array<double, 8>> edge_perturb;
};

// Default draw: Ising terms (B, J) uniform in [-0.15, 1.15], perturbative
// terms uniform in [-0.2, 0.2]. Edge perturbations are symmetric (ab = ba).
inline IsingCoefficients random_ising_coefficients(std::size_t nx, std::size_t ny, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = nx * ny;
  const auto edges = periodic_lattice_edges(nx, ny);
  auto ising = [&] { return -0.15 + 1.3 * rng.uniform(); };
  auto pert = [&] { return -0.2 + 0.4 * rng.uniform(); };
  IsingCoefficients c;
  for (std::size_t v = 0; v < n; ++v) {
    c.field.push_back(ising());
    c.perturb.push_back({pert(), pert()});
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    c.coupling.push_back(ising());
    const double xx = pert(), xy = pert(), xz = pert(), yy = pert(), yz = pert();
    c.edge_perturb.push_back({xx, xy, xz, xy, yy, yz, xz, yz});
  }
  return c;
}

inline Observable ising_observable(std::size_t nx, std::size_t ny, const IsingCoefficients& c) {
  const std::size_t n = nx * ny;
  const auto edges = periodic_lattice_edges(nx, ny);
  if (c.field.size() != n || c.perturb.size() != n || c.coupling.size() != edges.size() ||
      c.edge_perturb.size() != edges.size())
    throw InvalidInput("Ising coefficient arrays do not match the lattice");
  Observable obs;
  obs.width = n;
  auto term = [&](double coef, std::vector<std::pair<std::size_t, char>> letters) {
    std::string s(n, 'I');
    for (auto [q, l] : letters) s[q] = l;
    if (std::abs(coef) >= kDropThreshold) obs.terms.push_back(Term{coef, PauliString::from_letters(s)});
  };
  for (std::size_t v = 0; v < n; ++v) {
    term(c.perturb[v][0], {{v, 'X'}});
    term(c.perturb[v][1], {{v, 'Y'}});
    term(c.field[v], {{v, 'Z'}});
  }
  static constexpr char kA[8] = {'X', 'X', 'X', 'Y', 'Y', 'Y', 'Z', 'Z'};
  static constexpr char kB[8] = {'X', 'Y', 'Z', 'X', 'Y', 'Z', 'X', 'Y'};
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    for (int k = 0; k < 8; ++k) term(c.edge_perturb[e][k], {{u, kA[k]}, {v, kB[k]}});
    term(c.coupling[e], {{u, 'Z'}, {v, 'Z'}});
  }
  return obs;
}

}  // namespace doublemeas
