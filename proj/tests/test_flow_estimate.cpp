#include "doctest.h"
#include "support.hpp"

#include "distix/flow_estimate.hpp"

using namespace distix;

TEST_CASE("block matching recovers an integer shift") {
  const Frame a = testing::textured_frame(24, 24, 3);
  // to(p) = a(p - (2, -1)), so flow anchored on a is (2, -1).
  const Frame b = backward_warp(a, FlowField(24, 24, {-2.0, 1.0}));
  const FlowField f = block_match(a, b);
  int good = 0, interior = 0;
  for (int y = 5; y < 19; ++y)
    for (int x = 5; x < 19; ++x) {
      ++interior;
      const Vec2 v = f.at(y, x);
      good += std::abs(v.x - 2.0) <= 0.25 && std::abs(v.y + 1.0) <= 0.25;
    }
  CHECK(good == interior);
}

TEST_CASE("block matching on a flat frame prefers zero motion") {
  const Frame a(8, 8, 1, 0.5);
  const FlowField f = block_match(a, a);
  for (const Vec2& v : f.data()) CHECK(v == Vec2{});
  CHECK_THROWS_AS(block_match(a, Frame(8, 9, 1)), Error);
  BlockMatchOptions bad;
  bad.radius = -1;
  CHECK_THROWS_AS(block_match(a, a, bad), Error);
}
