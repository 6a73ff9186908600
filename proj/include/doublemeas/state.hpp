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
#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doublemeas/errors.hpp"
#include "doublemeas/pauli.hpp"
#include "doublemeas/rng.hpp"

namespace doublemeas {

using cplx = std::complex<double>;

inline constexpr std::size_t kDefaultMaxQubits = 10;

// Dense state on `width` qubits. Basis index bit (width-1-k) is qubit k.
struct StateVector {
  std::size_t width = 0;
  std::vector<cplx> amplitudes;

  double norm() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return std::sqrt(s);
  }
};

inline void check_dense_width(std::size_t width, std::size_t max_qubits) {
  if (width > max_qubits)
    throw ResourceError("dense simulation of " + std::to_string(width) + " qubits exceeds the cap of " +
                        std::to_string(max_qubits));
}

// out = P |in>.
inline void apply_pauli(const PauliString& p, const std::vector<cplx>& in, std::vector<cplx>& out) {
  const std::uint64_t xm = p.x_mask(), zm = p.z_mask();
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const cplx phase = kIPow[p.y_count() % 4];
  out.resize(in.size());
  for (std::uint64_t b = 0; b < in.size(); ++b) {
    const cplx v = (std::popcount(b & zm) & 1U) ? -in[b] : in[b];
    out[b ^ xm] = phase * v;
  }
}

inline double expectation(const StateVector& s, const PauliString& p) {
  if (p.width() != s.width) throw InvalidInput("Pauli width does not match state width");
  const std::uint64_t xm = p.x_mask(), zm = p.z_mask();
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  const cplx phase = kIPow[p.y_count() % 4];
  cplx acc = 0.0;
  for (std::uint64_t b = 0; b < s.amplitudes.size(); ++b) {
    const cplx v = (std::popcount(b & zm) & 1U) ? -s.amplitudes[b] : s.amplitudes[b];
    acc += std::conj(s.amplitudes[b ^ xm]) * v;
  }
  return (phase * acc).real();
}

inline double observable_expectation(const StateVector& s, const Observable& obs) {
  double e = obs.identity_offset;
  for (const auto& t : obs.terms) e += t.coefficient * expectation(s, t.pauli);
  return e;
}

// Probability of the +1 outcome when measuring P on s.
inline double exact_theta(const StateVector& s, const PauliString& p) {
  return std::clamp((1.0 + expectation(s, p)) / 2.0, 0.0, 1.0);
}

// Probability that P (x) P on two copies of s yields +1: theta^2 + (1-theta)^2.
inline double exact_phi(const StateVector& s, const PauliString& p) {
  const double m = expectation(s, p);
  return (1.0 + m * m) / 2.0;
}

// Largest-magnitude amplitude (lowest index on ties) made real and positive.
inline void fix_global_phase(StateVector& s) {
  std::size_t best = 0;
  double best_mag = -1.0;
  for (std::size_t b = 0; b < s.amplitudes.size(); ++b) {
    const double m = std::abs(s.amplitudes[b]);
    if (m > best_mag * (1.0 + 1e-12)) {
      best_mag = m;
      best = b;
    }
  }
  if (best_mag <= 0.0) return;
  const cplx rot = std::conj(s.amplitudes[best]) / best_mag;
  for (auto& a : s.amplitudes) a *= rot;
  s.amplitudes[best] = cplx(s.amplitudes[best].real(), 0.0);
}

inline Eigen::MatrixXcd dense_matrix(const Observable& obs, std::size_t max_qubits = kDefaultMaxQubits) {
  check_dense_width(obs.width, max_qubits);
  const std::size_t dim = std::size_t{1} << obs.width;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Identity(dim, dim) * obs.identity_offset;
  static constexpr cplx kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (const auto& t : obs.terms) {
    const std::uint64_t xm = t.pauli.x_mask(), zm = t.pauli.z_mask();
    const cplx phase = kIPow[t.pauli.y_count() % 4] * t.coefficient;
    for (std::uint64_t b = 0; b < dim; ++b)
      h(b ^ xm, b) += (std::popcount(b & zm) & 1U) ? -phase : phase;
  }
  return h;
}

struct GroundState {
  StateVector state;
  double energy = 0.0;
};

inline GroundState ground_state(const Observable& obs, std::size_t max_qubits = kDefaultMaxQubits) {
  const Eigen::MatrixXcd h = dense_matrix(obs, max_qubits);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver did not converge");
  GroundState g;
  g.energy = es.eigenvalues()(0);
  g.state.width = obs.width;
  g.state.amplitudes.resize(h.rows());
  for (Eigen::Index b = 0; b < h.rows(); ++b) g.state.amplitudes[b] = es.eigenvectors()(b, 0);
  const double n = g.state.norm();
  for (auto& a : g.state.amplitudes) a /= n;
  fix_global_phase(g.state);
  return g;
}

// One "re im" pair per line, 2^width lines, '#' comments allowed. The vector is
// normalised on load.
inline StateVector parse_state(std::string_view text, std::size_t width,
                               std::size_t max_qubits = kDefaultMaxQubits) {
  check_dense_width(width, max_qubits);
  StateVector s;
  s.width = width;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::istringstream ls{std::string(t)};
    double re = 0, im = 0;
    std::string extra;
    if (!(ls >> re >> im) || (ls >> extra)) throw ParseError(line_no, "expected '<re> <im>'");
    if (!std::isfinite(re) || !std::isfinite(im)) throw ParseError(line_no, "non-finite amplitude");
    s.amplitudes.emplace_back(re, im);
  }
  const std::size_t dim = std::size_t{1} << width;
  if (s.amplitudes.size() != dim)
    throw InvalidInput("state has " + std::to_string(s.amplitudes.size()) + " amplitudes, expected " +
                       std::to_string(dim));
  const double n = s.norm();
  if (!(n > 0.0)) throw InvalidInput("state has zero norm");
  for (auto& a : s.amplitudes) a /= n;
  return s;
}

inline StateVector read_state(const std::string& path, std::size_t width,
                              std::size_t max_qubits = kDefaultMaxQubits) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open state file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_state(ss.str(), width, max_qubits);
}

enum class ShotKind { group, double_copy };

struct TermOutcome {
  std::size_t term = 0;
  int value = 1;  // +1 or -1
};

struct ShotOutcome {
  ShotKind kind = ShotKind::group;
  std::size_t group = 0;  // meaningful for group shots
  std::vector<TermOutcome> outcomes;
};

inline constexpr double kNormTolerance = 1e-9;

namespace detail {

// Measures P on `psi` in place, collapsing and renormalising it.
inline int measure_in_place(std::vector<cplx>& psi, std::vector<cplx>& scratch, const PauliString& p,
                            Rng& rng) {
  apply_pauli(p, psi, scratch);
  cplx overlap = 0.0;
  for (std::size_t b = 0; b < psi.size(); ++b) overlap += std::conj(psi[b]) * scratch[b];
  const double prob_plus = std::clamp((1.0 + overlap.real()) / 2.0, 0.0, 1.0);
  const int v = rng.uniform() < prob_plus ? 1 : -1;
  const double prob = v == 1 ? prob_plus : 1.0 - prob_plus;
  if (!(prob > 0.0)) throw NumericalError("sampled a zero-probability outcome");
  const double scale = 0.5 / std::sqrt(prob);
  double n2 = 0.0;
  for (std::size_t b = 0; b < psi.size(); ++b) {
    psi[b] = (v == 1 ? psi[b] + scratch[b] : psi[b] - scratch[b]) * scale;
    n2 += std::norm(psi[b]);
  }
  if (std::abs(std::sqrt(n2) - 1.0) > kNormTolerance) {
    const double n = std::sqrt(n2);
    if (!(n > 0.0)) throw NumericalError("post-measurement state vanished");
    for (auto& a : psi) a /= n;
  }
  return v;
}

}  // namespace detail

// Measures every term of `group` in sequence on a copy of `s`.
inline ShotOutcome sample_group_shot(const StateVector& s, const Observable& obs,
                                     const std::vector<std::size_t>& group, std::size_t group_id,
                                     Rng& rng) {
  if (obs.width != s.width) throw InvalidInput("observable width does not match state width");
  if (!is_commuting_set(obs, group)) throw InvalidInput("group members do not commute");
  ShotOutcome out;
  out.kind = ShotKind::group;
  out.group = group_id;
  std::vector<cplx> psi = s.amplitudes, scratch;
  for (auto t : group) out.outcomes.push_back({t, detail::measure_in_place(psi, scratch, obs.terms[t].pauli, rng)});
  return out;
}

inline StateVector tensor_square(const StateVector& s, std::size_t max_qubits) {
  check_dense_width(s.width, max_qubits);
  StateVector d;
  d.width = 2 * s.width;
  const std::size_t dim = s.amplitudes.size();
  d.amplitudes.resize(dim * dim);
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b < dim; ++b) d.amplitudes[a * dim + b] = s.amplitudes[a] * s.amplitudes[b];
  return d;
}

// Measures double_string(P_i) for every term on two copies of `s`.
inline ShotOutcome sample_double_shot(const StateVector& s, const Observable& obs, Rng& rng,
                                      std::size_t max_qubits = kDefaultMaxQubits) {
  if (obs.width != s.width) throw InvalidInput("observable width does not match state width");
  StateVector d = tensor_square(s, max_qubits);
  ShotOutcome out;
  out.kind = ShotKind::double_copy;
  std::vector<cplx> scratch;
  for (std::size_t t = 0; t < obs.size(); ++t)
    out.outcomes.push_back({t, detail::measure_in_place(d.amplitudes, scratch, double_string(obs.terms[t].pauli), rng)});
  return out;
}

}  // namespace doublemeas
