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


#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <complex>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doublemeas/pauli.hpp"

namespace dm = doublemeas;

namespace {

// Every string over {I, X, Y, Z} of length n.
std::vector<std::string> all_strings(std::size_t n) {
  std::vector<std::string> out{""};
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<std::string> next;
    for (const auto& s : out)
      for (char c : std::string("IXYZ")) next.push_back(s + c);
    out = std::move(next);
  }
  return out;
}

// Kronecker product of 2x2 Pauli matrices, leftmost letter outermost.
Eigen::MatrixXcd matrix_of(const std::string& letters) {
  using C = std::complex<double>;
  Eigen::Matrix2cd I, X, Y, Z;
  I << 1, 0, 0, 1;
  X << 0, 1, 1, 0;
  Y << 0, C(0, -1), C(0, 1), 0;
  Z << 1, 0, 0, -1;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(1, 1);
  for (char c : letters) {
    const Eigen::Matrix2cd& p = c == 'X' ? X : c == 'Y' ? Y : c == 'Z' ? Z : I;
    Eigen::MatrixXcd k(m.rows() * 2, m.cols() * 2);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index s = 0; s < m.cols(); ++s) k.block(2 * r, 2 * s, 2, 2) = m(r, s) * p;
    m = k;
  }
  return m;
}

dm::PauliString ps(const std::string& s) { return dm::PauliString::from_letters(s); }

std::set<std::set<std::string>> group_letters(const dm::Observable& obs, const dm::GroupCover& cover) {
  std::set<std::set<std::string>> out;
  for (const auto& g : cover.groups) {
    std::set<std::string> s;
    for (auto i : g) s.insert(obs.terms[i].pauli.str());
    out.insert(s);
  }
  return out;
}

}  // namespace

TEST(PauliString, LettersRoundTripAndBits) {
  for (const auto& s : all_strings(3)) EXPECT_EQ(ps(s).str(), s);
  const auto p = ps("IXZY");
  EXPECT_EQ(p.width(), 4u);
  EXPECT_EQ(p.weight(), 3u);
  EXPECT_EQ(p.y_count(), 1u);
  EXPECT_EQ(p.x_mask(), 0b0101u);  // X at qubit 1, Y at qubit 3
  EXPECT_EQ(p.z_mask(), 0b0011u);  // Z at qubit 2, Y at qubit 3
  EXPECT_TRUE(ps("III").is_identity());
  EXPECT_THROW(ps("XQ"), dm::InvalidInput);
}

TEST(PauliString, WideStringsUseSeveralWords) {
  std::string s(130, 'I');
  s[0] = 'X';
  s[64] = 'Y';
  s[129] = 'Z';
  const auto p = ps(s);
  EXPECT_EQ(p.str(), s);
  EXPECT_EQ(p.weight(), 3u);
  std::string t(130, 'I');
  t[64] = 'Z';
  EXPECT_FALSE(dm::commutes(p, ps(t)));
  t[129] = 'X';
  EXPECT_TRUE(dm::commutes(p, ps(t)));
}

TEST(Commutes, Examples) {
  EXPECT_TRUE(dm::commutes(ps("XX"), ps("YY")));
  EXPECT_FALSE(dm::commutes(ps("XI"), ps("YI")));
  EXPECT_TRUE(dm::commutes(ps("IX"), ps("XI")));
  EXPECT_THROW(dm::commutes(ps("X"), ps("XX")), dm::InvalidInput);
}

TEST(Commutes, AgreesWithMatrixCommutatorUpToThreeQubits) {
  for (std::size_t n = 1; n <= 3; ++n) {
    const auto strings = all_strings(n);
    std::vector<Eigen::MatrixXcd> mats;
    for (const auto& s : strings) mats.push_back(matrix_of(s));
    for (std::size_t a = 0; a < strings.size(); ++a)
      for (std::size_t b = 0; b < strings.size(); ++b) {
        const bool expected = (mats[a] * mats[b] - mats[b] * mats[a]).norm() < 1e-12;
        ASSERT_EQ(dm::commutes(ps(strings[a]), ps(strings[b])), expected) << strings[a] << " " << strings[b];
      }
  }
}

TEST(DoubleString, Examples) {
  EXPECT_EQ(dm::double_string(ps("ZI")).str(), "ZIZI");
  EXPECT_EQ(dm::double_string(ps("X")).str(), "XX");
  EXPECT_EQ(dm::double_string(ps("II")).str(), "IIII");
}

TEST(DoubleString, DoubledStringsAlwaysCommute) {
  for (std::size_t n = 1; n <= 3; ++n) {
    const auto strings = all_strings(n);
    for (const auto& a : strings)
      for (const auto& b : strings)
        ASSERT_TRUE(dm::commutes(dm::double_string(ps(a)), dm::double_string(ps(b)))) << a << " " << b;
  }
}

TEST(ParseObservable, Examples) {
  auto obs = dm::parse_observable("1.028 ZI\n0.416 ZZ");
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_EQ(obs.width, 2u);
  EXPECT_DOUBLE_EQ(obs.terms[0].coefficient, 1.028);
  EXPECT_EQ(obs.terms[1].pauli.str(), "ZZ");
  EXPECT_EQ(obs.identity_offset, 0.0);

  obs = dm::parse_observable("0.5 II");
  EXPECT_EQ(obs.size(), 0u);
  EXPECT_DOUBLE_EQ(obs.identity_offset, 0.5);

  obs = dm::parse_observable("1.0 XZ\n0.5 XZ");
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_DOUBLE_EQ(obs.terms[0].coefficient, 1.5);
}

TEST(ParseObservable, MergesDropsAndSkipsComments) {
  const auto obs = dm::parse_observable("# header\n\n  1.0 XI  \n2 IZ\n-1.0 XI\n0.25 II\n0.5 II\n3e-13 YY\n");
  ASSERT_EQ(obs.size(), 1u);
  EXPECT_EQ(obs.terms[0].pauli.str(), "IZ");
  EXPECT_DOUBLE_EQ(obs.identity_offset, 0.75);
}

TEST(ParseObservable, ErrorsNameTheLine) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      dm::parse_observable(text);
    } catch (const dm::ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("1 XX\n1 XQ\n"), 2u);
  EXPECT_EQ(line_of("1 XX\n\n1 XXX\n"), 3u);
  EXPECT_EQ(line_of("abc XX\n"), 1u);
  EXPECT_EQ(line_of("1.0x XX\n"), 1u);
  EXPECT_EQ(line_of("1 XX YY\n"), 1u);
  EXPECT_EQ(line_of("1\n"), 1u);
  EXPECT_EQ(line_of("inf XX\n"), 1u);
  EXPECT_NE(line_of("# only a comment\n"), 0u);
  try {
    dm::parse_observable("1 XX\n1 XQ\n");
  } catch (const dm::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(ParseObservable, SerializeRoundTrip) {
  const auto obs = dm::parse_observable("0.1 XYZ\n-0.30000000000000004 ZZI\n1e-5 IIY\n2.5 III\n");
  const auto again = dm::parse_observable(dm::serialize_observable(obs));
  ASSERT_EQ(again.size(), obs.size());
  EXPECT_EQ(again.identity_offset, obs.identity_offset);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    EXPECT_EQ(again.terms[k].pauli, obs.terms[k].pauli);
    EXPECT_EQ(again.terms[k].coefficient, obs.terms[k].coefficient);
  }
}

TEST(ParseObservable, ReadsFiles) {
  const std::string path = ::testing::TempDir() + "/obs.txt";
  std::ofstream(path) << "1 ZZ\n";
  EXPECT_EQ(dm::read_observable(path).size(), 1u);
  EXPECT_THROW(dm::read_observable(path + ".missing"), dm::InvalidInput);
}

TEST(GreedyCover, ToyObservableMatchesMaximalCliques) {
  const auto obs = dm::parse_observable("1 IX\n1 XI\n1 XX\n1 YY\n1 ZZ\n");
  const auto cover = dm::greedy_cover(obs);
  const std::set<std::set<std::string>> expected{{"IX", "XI", "XX"}, {"XX", "YY", "ZZ"}};
  EXPECT_EQ(group_letters(obs, cover), expected);

  // Brute force: maximal cliques of the commutation graph.
  std::set<std::set<std::string>> cliques;
  const std::size_t p = obs.size();
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    std::vector<std::size_t> set;
    for (std::size_t k = 0; k < p; ++k)
      if (mask >> k & 1U) set.push_back(k);
    if (!dm::is_commuting_set(obs, set)) continue;
    bool maximal = true;
    for (std::size_t k = 0; k < p && maximal; ++k) {
      if (mask >> k & 1U) continue;
      auto bigger = set;
      bigger.push_back(k);
      if (dm::is_commuting_set(obs, bigger)) maximal = false;
    }
    if (!maximal) continue;
    std::set<std::string> s;
    for (auto i : set) s.insert(obs.terms[i].pauli.str());
    cliques.insert(s);
  }
  EXPECT_EQ(cliques, expected);
}

TEST(GreedyCover, SingletonAndAnticommutingCases) {
  auto obs = dm::parse_observable("2 XZ\n");
  auto cover = dm::greedy_cover(obs);
  ASSERT_EQ(cover.size(), 1u);
  EXPECT_EQ(cover.groups[0], std::vector<std::size_t>{0});

  obs = dm::parse_observable("1 XI\n1 YI\n1 ZI\n");
  cover = dm::greedy_cover(obs);
  EXPECT_EQ(cover.size(), 3u);
  for (const auto& g : cover.groups) EXPECT_EQ(g.size(), 1u);
}

TEST(GreedyCover, CoversAndCommutesOnRandomObservables) {
  std::uint64_t state = 12345;
  auto next = [&] {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return state >> 33;
  };
  for (int trial = 0; trial < 50; ++trial) {
    std::ostringstream text;
    const std::size_t n = 1 + next() % 4, p = 1 + next() % 12;
    for (std::size_t k = 0; k < p; ++k) {
      std::string s;
      for (std::size_t q = 0; q < n; ++q) s += "IXYZ"[next() % 4];
      text << (1.0 + static_cast<double>(next() % 100)) / 10.0 << ' ' << s << '\n';
    }
    const auto obs = dm::parse_observable(text.str());
    const auto cover = dm::greedy_cover(obs);
    std::vector<int> seen(obs.size(), 0);
    for (std::size_t g = 0; g < cover.size(); ++g) {
      EXPECT_TRUE(dm::is_commuting_set(obs, cover.groups[g]));
      EXPECT_TRUE(std::is_sorted(cover.groups[g].begin(), cover.groups[g].end()));
      for (auto i : cover.groups[g]) seen[i] = 1;
    }
    for (std::size_t i = 0; i < obs.size(); ++i) {
      EXPECT_TRUE(seen[i]);
      EXPECT_FALSE(cover.membership[i].empty());
    }
  }
}

TEST(GreedyCover, MakeCoverRejectsUnknownTerms) {
  EXPECT_THROW(dm::make_cover(2, {{0, 2}}), dm::InvalidInput);
  const auto c = dm::make_cover(3, {{2, 0}, {1}});
  EXPECT_EQ(c.groups[0], (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(c.membership[2], std::vector<std::size_t>{0});
}
