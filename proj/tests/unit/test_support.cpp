#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "riccilab/config.hpp"
#include "riccilab/error.hpp"
#include "riccilab/rng.hpp"

using namespace riccilab;

TEST(Error, WhatCarriesKebabCode) {
  try {
    fail(ErrorCode::outside_reach, "too far");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::outside_reach);
    EXPECT_STREQ(e.what(), "outside-reach: too far");
  }
  EXPECT_EQ(to_string(ErrorCode::config_invalid), "config-invalid");
  EXPECT_EQ(to_string(ErrorCode::no_solution_found), "no-solution-found");
}

TEST(SplitSeed, DeterministicAndDistinct) {
  EXPECT_EQ(split_seed(7, 3), split_seed(7, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t m = 0; m < 20; ++m)
    for (std::uint64_t s = 0; s < 20; ++s) seen.insert(split_seed(m, s));
  EXPECT_EQ(seen.size(), 400u);
}

TEST(Rng, UniformRangeAndMoments) {
  Rng rng(42);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Rng, UnitVectorAndBall) {
  Rng rng(1);
  for (int n = 1; n <= 4; ++n) {
    for (int i = 0; i < 200; ++i) {
      EXPECT_NEAR(rng.unit_vector(n).norm(), 1.0, 1e-12);
      EXPECT_LE(rng.in_unit_ball(n).norm(), 1.0);
    }
  }
}

TEST(Rng, SameSeedSameStream) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Config, ParsesCommentsAndExpressions) {
  const auto cfg = Config::parse("# header\nmu = 18/19\nmanifold = torus:basis=[[1,0],[0,1]]  # trailing\n"
                                 "r = 2*pi\nflag = yes\nn = 12\np = [0.5, 1]\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("mu"), 18.0 / 19.0);
  EXPECT_EQ(cfg.get_string("manifold"), "torus:basis=[[1,0],[0,1]]");
  EXPECT_DOUBLE_EQ(cfg.get_double("r"), 2.0 * std::numbers::pi);
  EXPECT_TRUE(cfg.get_bool("flag", false));
  EXPECT_EQ(cfg.get_int("n", 0), 12);
  const Vec p = cfg.get_vec("p");
  ASSERT_EQ(p.size(), 2);
  EXPECT_DOUBLE_EQ(p[1], 1.0);
  EXPECT_NO_THROW(cfg.check_all_used());
}

TEST(Config, UnknownAndMalformedFieldsAreConfigErrors) {
  const auto cfg = Config::parse("a = 1\ntypo = 2\n");
  cfg.get_double("a");
  try {
    cfg.check_all_used();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::config_invalid);
    EXPECT_NE(std::string(e.what()).find("typo"), std::string::npos);
  }
  EXPECT_THROW(Config::parse("no equals sign"), Error);
  const auto bad = Config::parse("x = abc\nv = [1, \"a\"]\nk = 1.5\n");
  EXPECT_THROW(bad.get_double("x"), Error);
  EXPECT_THROW(bad.get_vec("v"), Error);
  EXPECT_THROW(bad.get_int("k", 0), Error);
  EXPECT_THROW(bad.get_double("missing"), Error);
  EXPECT_DOUBLE_EQ(bad.get_double("missing", 3.0), 3.0);
}

TEST(Config, ScalarSyntax) {
  EXPECT_DOUBLE_EQ(*parse_scalar("-pi/2"), -std::numbers::pi / 2);
  EXPECT_TRUE(std::isinf(*parse_scalar("inf")));
  EXPECT_DOUBLE_EQ(*parse_scalar("1e-3"), 1e-3);
  EXPECT_FALSE(parse_scalar("").has_value());
  EXPECT_FALSE(parse_scalar("1/").has_value());
}

TEST(Config, LaterValuesOverride) {
  auto cfg = Config::parse("seed = 1\n");
  cfg.set("seed", "5");
  EXPECT_EQ(cfg.get_u64("seed", 0), 5u);
}
