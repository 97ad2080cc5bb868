#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "riccilab/comparison.hpp"
#include "riccilab/error.hpp"

using namespace riccilab;

namespace {

constexpr double kPi = std::numbers::pi;

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST(ComparisonAngle, OracleValues) {
  EXPECT_NEAR(comparison_angle(0.0, 3, 4, 5), kPi / 2, 1e-14);
  EXPECT_NEAR(comparison_angle(0.0, 4, 5, 3), 0.64350110879328431279, 1e-14);
  EXPECT_NEAR(comparison_angle(1.0, 1, 1.2, 0.9), 0.99684981272794598716, 1e-12);
  EXPECT_NEAR(comparison_angle(4.0, 0.5, 0.6, 0.45), 0.99684981272794598716, 1e-12);
  EXPECT_NEAR(comparison_angle(-1.0, 1, 1.2, 0.9), 0.69637675078242377184, 1e-12);
  EXPECT_NEAR(comparison_angle(-1.0, 5, 5, 9.99), 2.941750175575489146, 1e-9);
}

TEST(ComparisonAngle, Errors) {
  EXPECT_EQ(code_of([] { comparison_angle(0.0, 1, 1, 3); }), ErrorCode::triangle_inequality_violation);
  EXPECT_EQ(code_of([] { comparison_angle(1.0, 2.5, 2.5, 2.5); }), ErrorCode::perimeter_too_large);
  EXPECT_EQ(code_of([] { comparison_angle(0.0, 0.0, 1, 1); }), ErrorCode::invalid_argument);
}

TEST(ComparisonAngle, CurvatureOrdering) {
  // Larger model curvature gives larger comparison angles.
  for (double c : {0.3, 0.8, 1.2}) {
    const double h = comparison_angle(-1.0, 1.0, 0.9, c);
    const double z = comparison_angle(0.0, 1.0, 0.9, c);
    const double s = comparison_angle(1.0, 1.0, 0.9, c);
    EXPECT_LT(h, z);
    EXPECT_LT(z, s);
  }
}

TEST(Triangle, EuclideanAnglesEqualComparisonAngles) {
  const auto m = Manifold::euclidean(2);
  const auto t = measure_triangle(m, make_vec({0, 0}), make_vec({3, 0}), make_vec({0, 4}));
  EXPECT_NEAR(t.lengths[0], 3, 1e-12);
  EXPECT_NEAR(t.lengths[1], 5, 1e-12);
  EXPECT_NEAR(t.lengths[2], 4, 1e-12);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) sum += t.angles[i];
  EXPECT_NEAR(sum, kPi, 1e-12);
  // alpha_1 is opposite the hypotenuse.
  EXPECT_NEAR(t.angles[1], kPi / 2, 1e-12);
  const auto rep = check_toponogov(t, 18.0 / 19.0);
  EXPECT_TRUE(rep.pass);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(rep.ratios[i], 1.0, 1e-12);
}

TEST(Triangle, DegenerateVertexIsRejected) {
  const auto m = Manifold::euclidean(2);
  EXPECT_EQ(code_of([&] { measure_triangle(m, make_vec({0, 0}), make_vec({0, 0}), make_vec({1, 0})); }),
            ErrorCode::degenerate_vertex);
}

TEST(Triangle, SphereAnglesExceedEuclideanComparison) {
  const auto m = Manifold::sphere(2, 1.0);
  for (std::uint64_t k = 0; k < 20; ++k) {
    const auto t = random_triangle(m, make_vec({kPi / 2, 0.0}), 0.5, k);
    const auto rep = check_toponogov(t, 1.0);
    EXPECT_TRUE(rep.pass) << k;
    double sum = 0.0;
    for (double a : t.angles) sum += a;
    EXPECT_GT(sum, kPi);
  }
}

TEST(Triangle, RandomTriangleIsSeededAndInsideBall) {
  const auto m = Manifold::hyperbolic(2, -1.0);
  const Vec p = make_vec({0.1, 0.0});
  const auto a = random_triangle(m, p, 0.8, 11);
  const auto b = random_triangle(m, p, 0.8, 11);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(a.vertices[i], b.vertices[i]);
    EXPECT_LE(m.model_distance(p, a.vertices[i]), 0.8 + 1e-9);
    EXPECT_GE(a.lengths[i], 0.8 / 20);
  }
}

TEST(Toponogov, InvalidMu) {
  const auto t = measure_triangle(Manifold::euclidean(2), make_vec({0, 0}), make_vec({1, 0}), make_vec({0, 1}));
  EXPECT_EQ(code_of([&] { check_toponogov(t, 0.0); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { check_toponogov(t, 1.5); }), ErrorCode::invalid_argument);
}

// Large hyperbolic triangles have thin corners, so the radius is finite.
TEST(Rac, HyperbolicRadiusIsFiniteAndScales) {
  const auto h = Manifold::hyperbolic(2, -1.0);
  const Vec p = make_vec({0.0, 0.0});
  const double r = estimate_rac(h, p, 18.0 / 19.0, 4.0, 12, 3);
  EXPECT_GT(r, 0.0);
  EXPECT_LT(r, 4.0);
  const double r2 = estimate_rac(h.scaled(2.0), p, 18.0 / 19.0, 8.0, 12, 3);
  EXPECT_NEAR(r2 / r, 2.0, 0.2);
}

TEST(Rac, EuclideanPlaneReachesTheCap) {
  const double r = estimate_rac(Manifold::euclidean(2), make_vec({0, 0}), 18.0 / 19.0, 3.0, 20, 1);
  EXPECT_DOUBLE_EQ(r, 3.0);
}

TEST(ComparisonCsv, RowHasHeaderColumnCount) {
  const auto t = measure_triangle(Manifold::euclidean(2), make_vec({0, 0}), make_vec({1, 0}), make_vec({0, 1}));
  const auto rep = check_toponogov(t, 18.0 / 19.0);
  const auto header = comparison_csv_header();
  const auto row = comparison_csv_row("euclidean:n=2", 1.0, t, rep);
  auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(commas(header), commas(row));
}
