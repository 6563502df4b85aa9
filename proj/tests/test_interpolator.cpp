#include "doctest.h"
#include "support.hpp"

#include "distix/interpolator.hpp"
#include "distix/metrics.hpp"

using namespace distix;
using namespace distix::testing;

namespace {

lab::SceneSpec one_square(Vec2 start, Vec2 end) {
  lab::SceneSpec s;
  s.canvas = {24, 32};
  s.channels = 1;
  s.background = {0.2, 0.2, 0.2};
  lab::Shape sq;
  sq.kind = lab::ShapeKind::Square;
  sq.size = 6;
  sq.start = start;
  sq.end = end;
  sq.color = {0.9, 0.9, 0.9};
  s.shapes.push_back(sq);
  return s;
}

WarpPair flat_pair(double a, double b, double wp, double wm) {
  return {Frame(1, 1, 1, a), Frame(1, 1, 1, b), WeightMap(1, 1, wp), WeightMap(1, 1, wm)};
}

}  // namespace

TEST_CASE("scaled flows") {
  const FlowField v01(1, 1, {4, -2}), v10(1, 1, {-4, 2});
  ScaledFlows s = scaled_flows(v01, v10, uniform_map(0.25, 1, 1));
  CHECK(s.f0t.at(0, 0) == Vec2{1, -0.5});
  CHECK(s.f1t.at(0, 0) == Vec2{-3, 1.5});
  s = scaled_flows(v01, v10, uniform_map(0, 1, 1));
  CHECK(s.f0t.at(0, 0) == Vec2{0, 0});
  CHECK(s.f1t.at(0, 0) == Vec2{-4, 2});
  CHECK_THROWS_AS(scaled_flows(v01, FlowField(2, 1), uniform_map(0, 1, 1)), Error);
}

TEST_CASE("occlusion mask") {
  InterpConfig cfg;
  const WarpPair both = flat_pair(0.2, 0.6, 1, 1);
  CHECK(occlusion_mask(both, cfg, uniform_map(0.1, 1, 1)).at(0, 0) == doctest::Approx(0.9).epsilon(2e-3));
  CHECK(occlusion_mask(flat_pair(0.2, 0.6, 1, 0), cfg, uniform_map(0.5, 1, 1)).at(0, 0) ==
        doctest::Approx(1.0).epsilon(3e-3));
  cfg.mask_mode = MaskMode::Fixed;
  cfg.fixed_alpha = 0.3;
  CHECK(occlusion_mask(both, cfg, uniform_map(0.9, 1, 1)).at(0, 0) == 0.3);
  cfg.mask_mode = MaskMode::Photometric;
  // Far apart colors commit to the nearer side.
  CHECK(occlusion_mask(flat_pair(0.0, 1.0, 1, 1), cfg, uniform_map(0.2, 1, 1)).at(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(parse_mask_mode("photometric") == MaskMode::Photometric);
  CHECK(std::string(to_string(MaskMode::SplatWeight)) == "splat_weight");
  CHECK_THROWS_AS(parse_mask_mode("soft"), Error);
}

TEST_CASE("two-way blend") {
  const WarpPair p = flat_pair(0.2, 0.6, 1, 1);
  CHECK(blend_two(p, MaskImage(1, 1, 0.5)).at(0, 0) == doctest::Approx(0.4));
  // A side without mass is ignored whatever the mask says.
  CHECK(blend_two(flat_pair(0.2, 0.6, 0, 1), MaskImage(1, 1, 0.9)).at(0, 0) == doctest::Approx(0.6));
  // Two-sided holes fall back.
  CHECK(blend_two(flat_pair(0.2, 0.6, 0, 0), MaskImage(1, 1, 0.5), Frame(1, 1, 1, 0.7)).at(0, 0) == 0.7);
}

TEST_CASE("hole filling") {
  Frame f(1, 3, 1, std::vector<double>{0.2, 0.0, 0.6});
  std::vector<unsigned char> hole{0, 1, 0};
  CHECK(fill_holes(f, hole, nullptr) == 0);
  CHECK(f.at(0, 1) == doctest::Approx(0.4));
  Frame g(1, 1, 1, 0.0);
  std::vector<unsigned char> h1{1};
  CHECK(fill_holes(g, h1, nullptr) == 1);
}

TEST_CASE("constant-velocity square") {
  const lab::SceneSpec spec = one_square({8, 12}, {18, 12});
  const PairFixture p = make_pair(spec);
  const Frame mid = interpolate(p.i0, p.i1, p.v01, p.v10, uniform_map(0.5, 24, 32));
  CHECK(metrics::psnr(mid, lab::rasterize(spec, 0.5)) >= 35.0);
  CHECK(metrics::psnr(interpolate(p.i0, p.i1, p.v01, p.v10, uniform_map(0, 24, 32)), p.i0) >= 45.0);
  CHECK(metrics::psnr(interpolate(p.i0, p.i1, p.v01, p.v10, uniform_map(1, 24, 32)), p.i1) >= 45.0);
  for (double v : mid.data()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("larger distance moves the object further") {
  const lab::SceneSpec spec = one_square({8, 12}, {22, 12});
  const PairFixture p = make_pair(spec);
  double last = -1.0;
  for (int k = 0; k <= 10; ++k) {
    const Frame f = interpolate(p.i0, p.i1, p.v01, p.v10, uniform_map(k / 10.0, 24, 32));
    const double cx = lab::object_centroid(f, 0.2, 0, 0, 32, 24, 0.05).x;
    CHECK(cx > last);
    last = cx;
  }
}

TEST_CASE("swapping the endpoints mirrors the distance") {
  std::mt19937_64 rng(31);
  const lab::SceneSpec spec = random_scene(rng, 32, 32, 2, lab::VelocityProfile::constant(), 4, 8);
  const PairFixture p = make_pair(spec);
  for (double d : {0.3, 0.7}) {
    const Frame a = interpolate(p.i0, p.i1, p.v01, p.v10, uniform_map(d, 32, 32));
    const Frame b = interpolate(p.i1, p.i0, p.v10, p.v01, uniform_map(1.0 - d, 32, 32));
    CHECK(metrics::psnr(a, b) >= 40.0);
  }
}

TEST_CASE("interpolate validates its inputs") {
  const Frame f(4, 4, 1);
  const FlowField v(4, 4);
  CHECK_THROWS_AS(interpolate(f, Frame(4, 5, 1), v, v, uniform_map(0.5, 4, 4)), Error);
  CHECK_THROWS_AS(interpolate(f, f, v, v, uniform_map(0.5, 3, 4)), Error);
  InterpConfig bad;
  bad.eps = 0;
  CHECK_THROWS_AS(interpolate(f, f, v, v, uniform_map(0.5, 4, 4), bad), Error);
  // Out-of-range maps are clamped, not rejected.
  DistanceMap wide(4, 4, 1.7);
  CHECK(interpolate(f, f, v, v, wide) == interpolate(f, f, v, v, uniform_map(1, 4, 4)));
}
