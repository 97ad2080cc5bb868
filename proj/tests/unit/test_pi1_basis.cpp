#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "riccilab/error.hpp"
#include "riccilab/pi1_basis.hpp"
#include "riccilab/rng.hpp"

using namespace riccilab;

namespace {

IntVec iv(std::initializer_list<std::int64_t> xs) {
  IntVec v(static_cast<int>(xs.size()));
  int i = 0;
  for (auto x : xs) v[i++] = x;
  return v;
}

Mat diag(double a, double b) {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

}  // namespace

TEST(Sublattice, MembershipAndIndex) {
  const std::vector<IntVec> g = {iv({2, 0}), iv({1, 3})};
  EXPECT_EQ(sublattice_index(g, 2), 6);
  EXPECT_TRUE(in_sublattice(g, iv({3, 3})));
  EXPECT_FALSE(in_sublattice(g, iv({1, 0})));
  EXPECT_EQ(sublattice_index({iv({1, 1})}, 2), 0);
  EXPECT_TRUE(in_sublattice({iv({1, 1})}, iv({-4, -4})));
}

TEST(LoopLength, IsTheLatticeNorm) {
  const DeckLattice l(diag(1, 10));
  EXPECT_NEAR(loop_length(l, iv({3, 1})), std::sqrt(109.0), 1e-12);
  EXPECT_THROW(loop_length(l, iv({1})), Error);
}

TEST(ShortBasis, IntegerLattice) {
  const auto b = short_basis(DeckLattice::integer(2));
  ASSERT_EQ(b.elements.size(), 2u);
  EXPECT_DOUBLE_EQ(b.elements[0].length, 1.0);
  EXPECT_DOUBLE_EQ(b.elements[1].length, 1.0);
  EXPECT_TRUE(b.generates);
  EXPECT_EQ(b.index, 1);
  // Sign and tie-break: first nonzero coefficient positive, larger vector first.
  EXPECT_EQ(b.elements[0].coeffs, iv({1, 0}));
  EXPECT_EQ(b.elements[1].coeffs, iv({0, 1}));
}

TEST(ShortBasis, LongTorus) {
  const auto b = short_basis(DeckLattice(diag(1, 10)));
  ASSERT_EQ(b.elements.size(), 2u);
  EXPECT_DOUBLE_EQ(b.elements[0].length, 1.0);
  EXPECT_DOUBLE_EQ(b.elements[1].length, 10.0);
  EXPECT_TRUE(verify_basis_properties(b).pass);
}

TEST(ShortBasis, LengthCapStopsEarly) {
  const auto b = short_basis(DeckLattice(diag(1, 10)), 5.0);
  EXPECT_EQ(b.elements.size(), 1u);
  EXPECT_FALSE(b.generates);
  EXPECT_EQ(b.index, 0);
  const auto rep = verify_basis_properties(short_basis(DeckLattice(diag(1, 10))), 2.0);
  EXPECT_FALSE(rep.pass);
  ASSERT_TRUE(rep.violation.has_value());
  EXPECT_EQ(rep.violation->property, "cap");
}

// Hexagonal lattice: three shortest classes, but two already generate.
TEST(ShortBasis, HexagonalLattice) {
  Mat b(2, 2);
  b << 1.0, 0.5, 0.0, std::sqrt(3.0) / 2;
  const auto sb = short_basis(DeckLattice(b));
  ASSERT_EQ(sb.elements.size(), 2u);
  EXPECT_NEAR(sb.elements[0].length, 1.0, 1e-12);
  EXPECT_NEAR(sb.elements[1].length, 1.0, 1e-12);
  EXPECT_TRUE(verify_basis_properties(sb).pass);
}

TEST(ShortBasis, RandomLatticesSatisfyProperties) {
  Rng rng(2024);
  int tested = 0;
  while (tested < 60) {
    const int n = 2 + tested % 2;
    Mat b(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = rng.uniform(-1, 1);
    if (std::abs(b.determinant()) < 0.05) continue;
    ++tested;
    const auto sb = short_basis(DeckLattice(b));
    EXPECT_TRUE(sb.generates);
    EXPECT_EQ(sb.index, 1);
    const auto rep = verify_basis_properties(sb);
    EXPECT_TRUE(rep.pass) << (rep.violation ? rep.violation->describe() : "");
    for (std::size_t i = 1; i < sb.elements.size(); ++i) {
      EXPECT_LE(sb.elements[i - 1].length, sb.elements[i].length + 1e-12);
    }
    if (n == 2) {
      EXPECT_LE(sb.elements.size(), 6u);
    }
  }
}

TEST(ShortBasis, CsvRow) {
  const auto b = short_basis(DeckLattice(diag(1, 10)));
  EXPECT_EQ(basis_csv_header(2), "c0,c1,length");
  EXPECT_EQ(basis_csv_row(b.elements[0]).substr(0, 4), "1,0,");
}
