#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "riccilab/error.hpp"
#include "riccilab/geodesic.hpp"

using namespace riccilab;

namespace {

constexpr double kPi = std::numbers::pi;

GeodesicOptions shooting() {
  GeodesicOptions o;
  o.backend = GeodesicBackend::shooting;
  return o;
}

}  // namespace

TEST(Geodesic, IntegrationAgreesWithClosedFormExp) {
  const auto s = Manifold::sphere(2, 1.0);
  const Vec p = make_vec({1.0, 0.5});
  const Vec v = make_vec({0.3, -0.8});
  const auto path = integrate_geodesic(s, p, v, 1.2, 0.01);
  ASSERT_FALSE(path.truncated);
  const Vec w = v / s.norm(p, v) * 1.2;
  const Vec q = exp_map(s, p, w);
  EXPECT_LT(s.model_distance(path.end_point, q), 1e-8);
  EXPECT_NEAR(path.length, 1.2, 1e-12);
  EXPECT_NEAR(s.norm(path.end_point, path.end_velocity), 1.0, 1e-8);
}

TEST(Geodesic, ShootingMatchesModelDistance) {
  const auto s = Manifold::sphere(2, 1.0);
  const auto h = Manifold::hyperbolic(2, -1.0);
  EXPECT_NEAR(distance(s, make_vec({0.7, 0.3}), make_vec({2.1, -1.2}), shooting()), 1.9249439521694263752, 1e-7);
  EXPECT_NEAR(distance(h, make_vec({0.1, 0.2}), make_vec({-0.3, 0.25}), shooting()), 0.87074436214731411624, 1e-7);
}

TEST(Geodesic, MinimalGeodesicsAreSortedAndReachTarget) {
  const auto s = Manifold::sphere(2, 1.0);
  const Vec p = make_vec({1.0, 0.0});
  const Vec q = make_vec({1.4, 1.0});
  const auto paths = minimal_geodesics(s, p, q, 1e-3, shooting());
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_LT(s.model_distance(paths[0].end_point, q), 1e-7);
  EXPECT_TRUE(paths[0].is_minimal);
  EXPECT_TRUE(minimal_geodesics(s, p, p, 1e-3).empty());
}

// (0,0) to (0.5,0) on the unit square torus: two geodesics, left and right.
TEST(Geodesic, TorusHasTwoMinimalGeodesicsToHalfPeriod) {
  const auto t = Manifold::parse("torus:basis=[[1,0],[0,1]]");
  const auto paths = minimal_geodesics(t, make_vec({0.0, 0.0}), make_vec({0.5, 0.0}), 1e-3);
  ASSERT_EQ(paths.size(), 2u);
  for (const auto& g : paths) {
    EXPECT_NEAR(g.length, 0.5, 1e-9);
    EXPECT_NEAR(std::abs(g.initial_velocity[0]), 1.0, 1e-9);
  }
  EXPECT_NEAR(paths[0].initial_velocity[0] + paths[1].initial_velocity[0], 0.0, 1e-9);
}

TEST(Geodesic, ExpThenDistanceIsIdentityForShortVectors) {
  const auto m = Manifold::parse("ellipsoid:a=1,b=1.2,c=0.8");
  const Vec p = make_vec({1.2, 0.7});
  for (double t : {0.1, 0.4, 0.8}) {
    const Vec v = make_vec({0.6, 0.5});
    const Vec w = v / m.norm(p, v) * t;
    const Vec q = exp_map(m, p, w);
    EXPECT_NEAR(distance(m, p, q), t, 1e-6) << t;
  }
}

TEST(Geodesic, DistanceIsSymmetricOnEllipsoid) {
  const auto m = Manifold::parse("ellipsoid:a=1,b=1,c=0.8");
  const Vec p = make_vec({0.9, 0.2});
  const Vec q = make_vec({2.0, 2.5});
  EXPECT_NEAR(distance(m, p, q), distance(m, q, p), 1e-6);
}

TEST(Geodesic, SpreadDirectionsAreUnitAndDistinct) {
  for (int n = 2; n <= 4; ++n) {
    const auto d = spread_directions(n, 2 * n * n);
    ASSERT_EQ(static_cast<int>(d.size()), 2 * n * n);
    for (std::size_t i = 0; i < d.size(); ++i) {
      EXPECT_NEAR(d[i].norm(), 1.0, 1e-12);
      for (std::size_t j = 0; j < i; ++j) EXPECT_GT((d[i] - d[j]).norm(), 1e-3);
    }
  }
}

TEST(Conjugate, RoundSpheres) {
  const auto s1 = Manifold::sphere(2, 1.0);
  const auto r1 = first_conjugate_time(s1, make_vec({1.0, 0.3}), make_vec({0.4, 0.9}), 10.0);
  ASSERT_TRUE(r1.first_conjugate_time.has_value());
  EXPECT_NEAR(*r1.first_conjugate_time, kPi, 1e-3);
  const auto s4 = Manifold::sphere(2, 4.0);
  const auto r4 = first_conjugate_time(s4, make_vec({1.2, 0.0}), make_vec({0.3, 1.0}), 10.0);
  ASSERT_TRUE(r4.first_conjugate_time.has_value());
  EXPECT_NEAR(*r4.first_conjugate_time, kPi / 2, 1e-2);
  EXPECT_NEAR(estimate_conjugate_radius(Manifold::sphere(3, 1.0), 4, 10.0, 7), kPi, 1e-3);
}

TEST(Conjugate, NonPositiveCurvatureHasNone) {
  EXPECT_FALSE(first_conjugate_time(Manifold::euclidean(2), make_vec({0, 0}), make_vec({1, 1}), 10.0)
                   .first_conjugate_time.has_value());
  const auto t = Manifold::parse("torus:basis=[[1,0],[0,1]]");
  EXPECT_FALSE(first_conjugate_time(t, make_vec({0.2, 0.3}), make_vec({1, 0.3}), 10.0).first_conjugate_time);
  EXPECT_TRUE(std::isinf(estimate_conjugate_radius(t, 4, 10.0, 1)));
}

// A meridian runs into the pole band of the chart.
TEST(Conjugate, ChartSingularityIsReported) {
  const auto s = Manifold::sphere(2, 1.0);
  try {
    first_conjugate_time(s, make_vec({1.2, 0.0}), make_vec({1.0, 0.0}), 10.0);
    FAIL() << "expected left-chart-domain";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::left_chart_domain);
  }
  const auto h = Manifold::hyperbolic(2, -1.0);
  EXPECT_FALSE(first_conjugate_time(h, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), 10.0).first_conjugate_time);
}
