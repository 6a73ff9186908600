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
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "doublemeas/errors.hpp"

namespace doublemeas {

// A Pauli string in symplectic form: I=(0,0), X=(1,0), Z=(0,1), Y=(1,1).
// Qubit 0 is the leftmost letter.
class PauliString {
 public:
  PauliString() = default;

  explicit PauliString(std::size_t width)
      : width_(width), x_(words(width), 0), z_(words(width), 0) {}

  static PauliString from_letters(std::string_view letters) {
    PauliString p(letters.size());
    for (std::size_t k = 0; k < letters.size(); ++k) {
      switch (letters[k]) {
        case 'I': break;
        case 'X': p.set(k, true, false); break;
        case 'Y': p.set(k, true, true); break;
        case 'Z': p.set(k, false, true); break;
        default:
          throw InvalidInput(std::string("invalid Pauli letter '") + letters[k] + "'");
      }
    }
    return p;
  }

  std::size_t width() const { return width_; }

  bool x(std::size_t k) const { return (x_[k / 64] >> (k % 64)) & 1U; }
  bool z(std::size_t k) const { return (z_[k / 64] >> (k % 64)) & 1U; }

  void set(std::size_t k, bool xb, bool zb) {
    const std::uint64_t m = std::uint64_t{1} << (k % 64);
    x_[k / 64] = xb ? (x_[k / 64] | m) : (x_[k / 64] & ~m);
    z_[k / 64] = zb ? (z_[k / 64] | m) : (z_[k / 64] & ~m);
  }

  char letter(std::size_t k) const {
    static constexpr char kLetters[4] = {'I', 'X', 'Z', 'Y'};
    return kLetters[(x(k) ? 1 : 0) | (z(k) ? 2 : 0)];
  }

  std::string str() const {
    std::string s(width_, 'I');
    for (std::size_t k = 0; k < width_; ++k) s[k] = letter(k);
    return s;
  }

  bool is_identity() const {
    for (std::size_t w = 0; w < x_.size(); ++w)
      if (x_[w] | z_[w]) return false;
    return true;
  }

  std::size_t weight() const {
    std::size_t n = 0;
    for (std::size_t w = 0; w < x_.size(); ++w) n += std::popcount(x_[w] | z_[w]);
    return n;
  }

  std::size_t y_count() const {
    std::size_t n = 0;
    for (std::size_t w = 0; w < x_.size(); ++w) n += std::popcount(x_[w] & z_[w]);
    return n;
  }

  // Bit masks over qubits 0..63, qubit k at bit (width-1-k) so that the
  // leftmost letter is the most significant bit of a basis index.
  std::uint64_t x_mask() const { return mask(x_); }
  std::uint64_t z_mask() const { return mask(z_); }

  friend bool operator==(const PauliString& a, const PauliString& b) {
    return a.width_ == b.width_ && a.x_ == b.x_ && a.z_ == b.z_;
  }

  std::size_t hash() const {
    std::size_t h = width_;
    for (std::size_t w = 0; w < x_.size(); ++w) {
      h = h * 1000003U ^ std::hash<std::uint64_t>{}(x_[w]);
      h = h * 1000003U ^ std::hash<std::uint64_t>{}(z_[w]);
    }
    return h;
  }

  // Count of qubits where the letters anticommute.
  friend std::size_t anticommuting_positions(const PauliString& a, const PauliString& b) {
    if (a.width_ != b.width_)
      throw InvalidInput("width mismatch: " + std::to_string(a.width_) + " vs " +
                         std::to_string(b.width_));
    std::size_t n = 0;
    for (std::size_t w = 0; w < a.x_.size(); ++w)
      n += std::popcount((a.x_[w] & b.z_[w]) ^ (a.z_[w] & b.x_[w]));
    return n;
  }

 private:
  static std::size_t words(std::size_t width) { return (width + 63) / 64; }

  std::uint64_t mask(const std::vector<std::uint64_t>& bits) const {
    if (width_ > 64) throw ResourceError("basis masks need width <= 64");
    std::uint64_t m = 0;
    for (std::size_t k = 0; k < width_; ++k)
      if ((bits[k / 64] >> (k % 64)) & 1U) m |= std::uint64_t{1} << (width_ - 1 - k);
    return m;
  }

  std::size_t width_ = 0;
  std::vector<std::uint64_t> x_;
  std::vector<std::uint64_t> z_;
};

inline bool commutes(const PauliString& a, const PauliString& b) {
  return anticommuting_positions(a, b) % 2 == 0;
}

// a followed by a copy of itself: the operator a (x) a on two state copies.
inline PauliString double_string(const PauliString& a) {
  const std::size_t q = a.width();
  PauliString d(2 * q);
  for (std::size_t k = 0; k < q; ++k) {
    d.set(k, a.x(k), a.z(k));
    d.set(k + q, a.x(k), a.z(k));
  }
  return d;
}

struct PauliHash {
  std::size_t operator()(const PauliString& p) const { return p.hash(); }
};

struct Term {
  double coefficient = 0.0;
  PauliString pauli;
};

// O = identity_offset + sum_i c_i P_i over distinct non-identity strings.
struct Observable {
  std::size_t width = 0;
  std::vector<Term> terms;
  double identity_offset = 0.0;

  std::size_t size() const { return terms.size(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

inline constexpr double kDropThreshold = 1e-12;

// Lines are "# comment", blank, or "<coefficient> <letters>". Repeated strings
// are summed; terms whose sum is below 1e-12 in magnitude are dropped; the
// all-identity string goes to identity_offset.
inline Observable parse_observable(std::string_view text) {
  Observable obs;
  bool have_width = false;
  std::vector<std::pair<double, PauliString>> merged;
  std::unordered_map<PauliString, std::size_t, PauliHash> index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;

    std::istringstream in{std::string(line)};
    std::string coef_tok, letters, extra;
    if (!(in >> coef_tok >> letters)) throw ParseError(line_no, "expected '<coefficient> <pauli letters>'");
    if (in >> extra) throw ParseError(line_no, "unexpected token '" + extra + "'");
    double c = 0.0;
    try {
      std::size_t used = 0;
      c = std::stod(coef_tok, &used);
      if (used != coef_tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(line_no, "bad coefficient '" + coef_tok + "'");
    }
    if (!std::isfinite(c)) throw ParseError(line_no, "non-finite coefficient");
    PauliString p;
    try {
      p = PauliString::from_letters(letters);
    } catch (const InvalidInput& e) {
      throw ParseError(line_no, e.what());
    }
    if (!have_width) {
      obs.width = p.width();
      have_width = true;
    } else if (p.width() != obs.width) {
      throw ParseError(line_no, "width " + std::to_string(p.width()) + " differs from " +
                                    std::to_string(obs.width));
    }
    if (p.is_identity()) {
      obs.identity_offset += c;
      continue;
    }
    auto [it, inserted] = index.emplace(p, merged.size());
    if (inserted)
      merged.emplace_back(c, std::move(p));
    else
      merged[it->second].first += c;
  }
  if (!have_width) throw ParseError(line_no, "no terms");
  for (auto& [c, p] : merged)
    if (std::abs(c) >= kDropThreshold) obs.terms.push_back(Term{c, std::move(p)});
  return obs;
}

inline Observable read_observable(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open observable file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_observable(ss.str());
}

inline std::string serialize_observable(const Observable& obs) {
  std::ostringstream os;
  os << "# " << obs.terms.size() << " terms on " << obs.width << " qubits\n";
  if (obs.identity_offset != 0.0)
    os << detail::format_double(obs.identity_offset) << ' ' << std::string(obs.width, 'I') << '\n';
  for (const auto& t : obs.terms) os << detail::format_double(t.coefficient) << ' ' << t.pauli.str() << '\n';
  return os.str();
}

// Groups of pairwise commuting term indices covering every term.
struct GroupCover {
  std::vector<std::vector<std::size_t>> groups;       // sorted term indices
  std::vector<std::vector<std::size_t>> membership;   // term -> groups containing it

  std::size_t size() const { return groups.size(); }
};

inline bool is_commuting_set(const Observable& obs, const std::vector<std::size_t>& set) {
  for (std::size_t a = 0; a < set.size(); ++a)
    for (std::size_t b = a + 1; b < set.size(); ++b)
      if (!commutes(obs.terms[set[a]].pauli, obs.terms[set[b]].pauli)) return false;
  return true;
}

inline GroupCover make_cover(std::size_t terms, std::vector<std::vector<std::size_t>> groups) {
  GroupCover cover;
  cover.membership.resize(terms);
  for (auto& g : groups) std::sort(g.begin(), g.end());
  cover.groups = std::move(groups);
  for (std::size_t gi = 0; gi < cover.groups.size(); ++gi)
    for (auto t : cover.groups[gi]) {
      if (t >= terms) throw InvalidInput("group refers to term " + std::to_string(t));
      cover.membership[t].push_back(gi);
    }
  return cover;
}

// Greedy cover. Terms are visited by descending |c| (stable). Each still
// uncovered term seeds a group that then takes, in the same order, every term
// (covered or not) commuting with all current members. Groups may overlap.
inline GroupCover greedy_cover(const Observable& obs) {
  const std::size_t p = obs.size();
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(obs.terms[a].coefficient) > std::abs(obs.terms[b].coefficient);
  });
  std::vector<char> covered(p, 0);
  std::vector<std::vector<std::size_t>> groups;
  for (auto seed : order) {
    if (covered[seed]) continue;
    std::vector<std::size_t> g{seed};
    for (auto t : order) {
      if (t == seed) continue;
      bool ok = true;
      for (auto m : g)
        if (!commutes(obs.terms[t].pauli, obs.terms[m].pauli)) {
          ok = false;
          break;
        }
      if (ok) g.push_back(t);
    }
    for (auto m : g) covered[m] = 1;
    groups.push_back(std::move(g));
  }
  return make_cover(p, std::move(groups));
}

}  // namespace doublemeas
