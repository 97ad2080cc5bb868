#include <gtest/gtest.h>

#include <cmath>

#include "riccilab/error.hpp"
#include "riccilab/lattice.hpp"
#include "riccilab/rng.hpp"

using namespace riccilab;

namespace {

Mat cols(std::initializer_list<std::initializer_list<double>> vs) {
  const int n = static_cast<int>(vs.size());
  Mat b(n, n);
  int j = 0;
  for (const auto& v : vs) {
    int i = 0;
    for (double x : v) b(i++, j) = x;
    ++j;
  }
  return b;
}

}  // namespace

TEST(Lattice, IntegerLatticeShortVectors) {
  const auto z2 = DeckLattice::integer(2);
  EXPECT_DOUBLE_EQ(z2.shortest_length(), 1.0);
  const auto v = z2.vectors_within(1.5);
  ASSERT_EQ(v.size(), 8u);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(v[i].length, 1.0);
  for (int i = 4; i < 8; ++i) EXPECT_DOUBLE_EQ(v[i].length, std::sqrt(2.0));
}

// Rows (2,1), (1,3): four vectors of length sqrt(5), then sqrt(10).
TEST(Lattice, EnumerationMatchesBruteForce) {
  const DeckLattice l(cols({{2, 1}, {1, 3}}));
  const auto v = l.vectors_within(std::sqrt(10.0) + 1e-9);
  ASSERT_GE(v.size(), 6u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(v[i].length, std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(v[4].length, std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(l.shortest_length(), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(l.covolume(), 5.0, 1e-12);
}

TEST(Lattice, LllIsUnimodularAndEquivalent) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 3;
    Mat b(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = rng.uniform(-2, 2);
    if (std::abs(b.determinant()) < 0.1) continue;
    IntMat u;
    const Mat r = lll_reduce(b, u);
    EXPECT_NEAR(std::abs(static_cast<double>(u.cast<double>().determinant())), 1.0, 1e-9);
    EXPECT_LT((b * u.cast<double>() - r).norm(), 1e-9);
  }
}

TEST(Lattice, ClosestTranslatesOfCellCenter) {
  const auto z2 = DeckLattice::integer(2);
  Vec x(2);
  x << 0.5, 0.5;
  const auto t = z2.closest_translates(x, 1e-9);
  ASSERT_EQ(t.size(), 4u);
  for (const auto& w : t) EXPECT_NEAR((x - w.vector).norm(), std::sqrt(0.5), 1e-12);
}

TEST(Lattice, ReduceAndClosestDifference) {
  const DeckLattice l(cols({{1, 0}, {0, 10}}));
  Vec x(2);
  x << 3.25, -4.0;
  const Vec r = l.reduce(x);
  EXPECT_NEAR(r[0], 0.25, 1e-12);
  EXPECT_NEAR(r[1], 6.0, 1e-12);
  const Vec d = l.closest_difference(x);
  EXPECT_NEAR(d[0], 0.25, 1e-12);
  EXPECT_NEAR(d[1], -4.0, 1e-12);
}

TEST(Lattice, BudgetIsEnforced) {
  const auto z2 = DeckLattice::integer(2);
  EXPECT_THROW(z2.vectors_within(1000.0, 100), Error);
}
