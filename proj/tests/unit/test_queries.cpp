#include <doctest.h>

#include <cmath>

#include "pillardet/queries.hpp"

using namespace pillardet;

TEST_CASE("init_queries pillar invariants") {
  DenseArray embed({16, 8});
  Rng rng(3);
  for (double& v : embed.values) v = rng.gaussian();

  const QuerySet qs = init_queries(16, 77, 25.0, embed);
  REQUIRE(qs.size() == 16);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const QueryBox& b = qs.boxes[i];
    CHECK(b.z == 0.0);
    CHECK(b.h == 4.0);
    CHECK(b.vx == 0.0);
    CHECK(b.vy == 0.0);
    CHECK(b.w >= 0.5);
    CHECK(b.l >= 0.5);
    CHECK(std::abs(b.x) <= 25.0);
    CHECK(std::abs(b.y) <= 25.0);
    CHECK(b.yaw >= -M_PI);
    CHECK(b.yaw < M_PI);
    // features come straight from the embedding rows
    for (std::size_t d = 0; d < 8; ++d) CHECK(qs.features[i][d] == embed(i, d));
  }
}

TEST_CASE("init_queries is deterministic per seed") {
  DenseArray embed({4, 4});
  const QuerySet a = init_queries(4, 5, 10.0, embed);
  const QuerySet b = init_queries(4, 5, 10.0, embed);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.boxes[i].x == b.boxes[i].x);
    CHECK(a.boxes[i].yaw == b.boxes[i].yaw);
  }
  const QuerySet c = init_queries(4, 6, 10.0, embed);
  bool any_diff = false;
  for (std::size_t i = 0; i < 4; ++i) any_diff |= a.boxes[i].x != c.boxes[i].x;
  CHECK(any_diff);

  CHECK_THROWS_AS(init_queries(0, 5, 10.0, embed), ConfigError);
  CHECK_THROWS_AS(init_queries(3, 5, 10.0, embed), ConfigError);
}

TEST_CASE("box vector round trip") {
  QueryBox b;
  b.x = 1.5;
  b.y = -2.0;
  b.z = 0.25;
  b.w = 2.0;
  b.l = 4.5;
  b.h = 1.7;
  b.yaw = 0.6;
  b.vx = -3.0;
  b.vy = 0.5;
  const QueryBox back = vector_to_box(box_to_vector(b));
  CHECK(back.x == b.x);
  CHECK(back.l == b.l);
  CHECK(back.yaw == b.yaw);
  CHECK(back.vy == b.vy);
}

TEST_CASE("yaw wraps into [-pi, pi)") {
  QueryBox b;
  b.w = b.l = b.h = 1.0;
  b.yaw = 3.0 * M_PI;
  const auto v = box_to_vector(b);
  CHECK(v[6] == doctest::Approx(-M_PI));
  CHECK(vector_to_box(v).yaw >= -M_PI);
  CHECK(vector_to_box(v).yaw < M_PI);
}

TEST_CASE("degenerate sizes are rejected") {
  CHECK_THROWS_AS(vector_to_box({0, 0, 0, 0, 0, 0, 0, 0, 0}), ContractViolation);
}
