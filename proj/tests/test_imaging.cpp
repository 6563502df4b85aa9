#include "doctest.h"
#include "support.hpp"

#include <cmath>

#include "distix/imaging.hpp"

using namespace distix;
using distix::testing::random_flow;
using distix::testing::random_frame;

namespace {

// Straight-line bilinear interpolation written out without shared code.
double naive_sample(const Frame& f, double x, double y, int c) {
  x = std::fmin(std::fmax(x, 0.0), f.width() - 1.0);
  y = std::fmin(std::fmax(y, 0.0), f.height() - 1.0);
  double acc = 0.0;
  for (int yy = 0; yy < f.height(); ++yy)
    for (int xx = 0; xx < f.width(); ++xx) {
      const double kx = 1.0 - std::fabs(x - xx);
      const double ky = 1.0 - std::fabs(y - yy);
      if (kx > 0 && ky > 0) acc += kx * ky * f.at(yy, xx, c);
    }
  return acc;
}

}  // namespace

TEST_CASE("frames reject bad shapes and values") {
  CHECK_THROWS_AS(Frame(0, 4, 1), Error);
  CHECK_THROWS_AS(Frame(2, 2, 2), Error);
  CHECK_THROWS_AS(Frame(1, 1, 1, std::vector<double>{1.5}), Error);
  CHECK_THROWS_AS(Frame(1, 2, 1, std::vector<double>{0.5}), Error);
  CHECK_THROWS_AS(FlowField(3, 0), Error);
  try {
    require_same_size({2, 3}, {3, 2}, "probe");
    FAIL("expected a mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("bilinear sampling") {
  Frame f(2, 2, 1, std::vector<double>{0.0, 1.0, 0.25, 0.75});
  CHECK(bilinear_sample(f, 1, 0)[0] == 1.0);
  CHECK(bilinear_sample(f, 0, 1)[0] == 0.25);
  CHECK(bilinear_sample(f, 0.5, 0)[0] == doctest::Approx(0.5));
  CHECK(bilinear_sample(f, 0.5, 0.5)[0] == doctest::Approx(0.5));
  // Clamped to the border.
  CHECK(bilinear_sample(f, -5, -5)[0] == 0.0);
  CHECK(bilinear_sample(f, 9, 9)[0] == 0.75);
}

TEST_CASE("backward warp matches a naive resampler") {
  std::mt19937_64 rng(3);
  const Frame f = random_frame(rng, 7, 9, 3);
  SUBCASE("zero flow is the identity") { CHECK(backward_warp(f, FlowField(7, 9)) == f); }
  SUBCASE("integer shift") {
    const Frame g = backward_warp(f, FlowField(7, 9, {1.0, 0.0}));
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x) CHECK(g.at(y, x, 1) == f.at(y, std::min(x + 1, 8), 1));
  }
  SUBCASE("random flow") {
    const FlowField flow = random_flow(rng, 7, 9, 3.0);
    const Frame g = backward_warp(f, flow);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 9; ++x)
        for (int c = 0; c < 3; ++c) {
          const Vec2 d = flow.at(y, x);
          CHECK(g.at(y, x, c) == doctest::Approx(naive_sample(f, x + d.x, y + d.y, c)).epsilon(1e-12));
        }
  }
  CHECK_THROWS_AS(backward_warp(f, FlowField(9, 7)), Error);
}

TEST_CASE("forward splat without importance") {
  std::mt19937_64 rng(4);
  const Frame f = random_frame(rng, 6, 6, 1);
  SUBCASE("zero flow") {
    const SplatResult s = forward_warp_splat(f, FlowField(6, 6));
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        CHECK(s.frame.at(y, x) == doctest::Approx(f.at(y, x)));
        CHECK(s.weight.at(y, x) == doctest::Approx(1.0));
      }
  }
  SUBCASE("shift leaves a hole in the first column") {
    const SplatResult s = forward_warp_splat(f, FlowField(6, 6, {1.0, 0.0}));
    for (int y = 0; y < 6; ++y) {
      CHECK(s.weight.at(y, 0) == 0.0);
      CHECK(s.frame.at(y, 0) == 0.0);
      for (int x = 1; x < 6; ++x) CHECK(s.frame.at(y, x) == doctest::Approx(f.at(y, x - 1)));
    }
  }
  SUBCASE("weight is conserved for in-bounds landings") {
    const FlowField flow = random_flow(rng, 6, 6, 2.5);
    const SplatResult s = forward_warp_splat(f, flow);
    // Brute-force total of the bilinear weights that land on the canvas.
    double expect = 0.0;
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        const double tx = x + flow.at(y, x).x, ty = y + flow.at(y, x).y;
        for (int yy = 0; yy < 6; ++yy)
          for (int xx = 0; xx < 6; ++xx) {
            const double kx = 1.0 - std::fabs(tx - xx), ky = 1.0 - std::fabs(ty - yy);
            if (kx > 0 && ky > 0) expect += kx * ky;
          }
      }
    double total = 0.0;
    for (double w : s.weight.data()) total += w;
    // Pixels below the hole threshold are zeroed, which can only lose a hair.
    CHECK(total == doctest::Approx(expect).epsilon(1e-3));
    CHECK(total <= expect + 1e-9);
    for (double v : s.frame.data()) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("forward splat with importance") {
  // Two sources collide on pixel 2. The faster one is in front.
  Frame f(1, 4, 1, std::vector<double>{0.2, 0.9, 0.0, 0.0});
  FlowField flow(1, 4);
  flow.at(0, 0) = {2.0, 0.0};
  flow.at(0, 1) = {1.0, 0.0};
  flow.at(0, 2) = {1.0, 0.0};
  flow.at(0, 3) = {5.0, 0.0};
  const SplatResult plain = forward_warp_splat(f, flow);
  CHECK(plain.frame.at(0, 2) == doctest::Approx(0.55));
  const SplatResult soft = forward_warp_splat(f, flow, motion_importance(flow, 4.0));
  CHECK(soft.frame.at(0, 2) == doctest::Approx(0.2));
  CHECK(soft.weight.at(0, 2) == doctest::Approx(2.0));

  SUBCASE("near-equal importance is averaged") {
    ImportanceMap imp(1, 4, 1.0);
    imp.at(0, 0) = 1.5;
    CHECK(forward_warp_splat(f, flow, imp).frame.at(0, 2) == doctest::Approx(0.55));
  }
  SUBCASE("a sliver in front leaves coverage for the layer behind") {
    FlowField g = flow;
    g.at(0, 0) = {1.1, 0.0};  // 0.1 of its mass reaches pixel 2
    ImportanceMap imp(1, 4, 1.0);
    imp.at(0, 0) = 100.0;
    const double v = forward_warp_splat(f, g, imp).frame.at(0, 2);
    CHECK(v == doctest::Approx(0.1 * 0.2 + 0.9 * 0.9));
  }
  SUBCASE("zero importance never lands") {
    ImportanceMap imp(1, 4, 1.0);
    imp.at(0, 1) = 0.0;
    FlowField g = flow;
    g.at(0, 0) = {0.0, 0.0};
    const SplatResult s = forward_warp_splat(f, g, imp);
    CHECK(s.frame.at(0, 0) == doctest::Approx(0.2));
    CHECK(s.frame.at(0, 2) == 0.0);
    CHECK(s.weight.at(0, 2) == 0.0);
  }
}

TEST_CASE("motion importance") {
  FlowField flow(1, 2);
  flow.at(0, 1) = {3.0, 4.0};
  const ImportanceMap imp = motion_importance(flow, 4.0);
  CHECK(imp.at(0, 0) == 1.0);
  CHECK(imp.at(0, 1) == doctest::Approx(std::exp(20.0)));
  flow.at(0, 1) = {1e6, 0.0};
  CHECK(std::isfinite(motion_importance(flow, 4.0).at(0, 1)));
  CHECK(motion_importance(flow, 0.0).at(0, 1) == 1.0);
}

TEST_CASE("splat_field carries several channels and marks holes") {
  FlowField flow(1, 3, {1.0, 0.0});
  const std::vector<double> vals{1, 2, 3, 4, 5, 6};
  const FieldSplat s = splat_field(vals, 2, flow, nullptr, -1.0);
  CHECK(s.values[0] == -1.0);
  CHECK(s.values[1] == -1.0);
  CHECK(s.values[2] == 1.0);
  CHECK(s.values[5] == 4.0);
  CHECK_THROWS_AS(splat_field(vals, 3, flow, nullptr), Error);
}
