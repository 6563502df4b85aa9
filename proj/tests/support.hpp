#pragma once

// Shared fixtures for unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "distix/lab.hpp"
#include "distix/spline.hpp"

namespace distix::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline FlowField random_flow(std::mt19937_64& rng, int h, int w, double mag) {
  FlowField f(h, w);
  for (Vec2& v : f.data()) v = {uniform(rng, -mag, mag), uniform(rng, -mag, mag)};
  return f;
}

inline Frame random_frame(std::mt19937_64& rng, int h, int w, int c) {
  Frame f(h, w, c);
  for (double& v : f.data()) v = uniform(rng, 0.0, 1.0);
  return f;
}

// Smooth texture so that warps and metrics see structure, not noise.
inline Frame textured_frame(int h, int w, int c, double phase = 0.0) {
  Frame f(h, w, c);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        f.at(y, x, ch) = 0.5 + 0.4 * std::sin(0.37 * x + 0.23 * y + phase + ch) * std::cos(0.19 * x - 0.31 * y);
      }
  return f;
}

struct PairFixture {
  lab::SceneSpec spec;
  Frame i0, i1;
  FlowField v01, v10;
};

inline PairFixture make_pair(const lab::SceneSpec& spec) {
  PairFixture p;
  p.spec = spec;
  p.i0 = lab::rasterize(spec, 0.0);
  p.i1 = lab::rasterize(spec, 1.0);
  p.v01 = lab::anchored_flow(spec, 0.0, 1.0);
  p.v10 = lab::anchored_flow(spec, 1.0, 0.0);
  return p;
}

// Shapes on a colored canvas, all with `profile`, placed so that they stay
// inside the canvas for every time in [t_lo, t_hi].
inline lab::SceneSpec random_scene(std::mt19937_64& rng, int h, int w, int shapes, const lab::VelocityProfile& profile,
                                   double min_len, double max_len, double t_lo = 0.0, double t_hi = 1.0,
                                   bool integer_motion = false) {
  lab::SceneSpec spec;
  spec.canvas = {h, w};
  spec.channels = 3;
  spec.background = {uniform(rng, 0.0, 0.3), uniform(rng, 0.0, 0.3), uniform(rng, 0.0, 0.3)};
  while (static_cast<int>(spec.shapes.size()) < shapes) {
    lab::Shape s;
    s.kind = rng() % 2 ? lab::ShapeKind::Disk : lab::ShapeKind::Square;
    s.size = uniform(rng, 4.0, 7.0);
    const double len = uniform(rng, min_len, max_len);
    const double angle = uniform(rng, 0.0, 6.283185307179586);
    Vec2 d{len * std::cos(angle), len * std::sin(angle)};
    if (integer_motion) d = {std::round(d.x), std::round(d.y)};
    s.start = {0.0, 0.0};
    s.end = d;
    s.profile = profile;
    Vec2 lo{1e9, 1e9}, hi{-1e9, -1e9};
    for (int i = 0; i <= 64; ++i) {
      const Vec2 c = s.center(t_lo + (t_hi - t_lo) * i / 64.0);
      lo = {std::min(lo.x, c.x), std::min(lo.y, c.y)};
      hi = {std::max(hi.x, c.x), std::max(hi.y, c.y)};
    }
    const double r = s.size / 2.0 + 0.5;
    const double x0 = r - lo.x, x1 = w - 1.0 - r - hi.x;
    const double y0 = r - lo.y, y1 = h - 1.0 - r - hi.y;
    if (x0 > x1 || y0 > y1) continue;
    s.start = {std::round(uniform(rng, x0, x1)), std::round(uniform(rng, y0, y1))};
    if (s.start.x < x0) s.start.x += 1.0;
    if (s.start.x > x1) s.start.x -= 1.0;
    if (s.start.y < y0) s.start.y += 1.0;
    if (s.start.y > y1) s.start.y -= 1.0;
    s.end = s.start + d;
    s.color = {uniform(rng, 0.5, 1.0), uniform(rng, 0.5, 1.0), uniform(rng, 0.5, 1.0)};
    spec.shapes.push_back(s);
  }
  return spec;
}

// Frames at -1, 0, 1, 2 with analytic flows anchored on I0.
inline spline::MultiFrameSet make_four_frames(const lab::SceneSpec& spec) {
  return {lab::rasterize(spec, -1.0),          lab::rasterize(spec, 0.0),
          lab::rasterize(spec, 1.0),           lab::rasterize(spec, 2.0),
          lab::anchored_flow(spec, 0.0, -1.0), lab::anchored_flow(spec, 0.0, 1.0),
          lab::anchored_flow(spec, 0.0, 2.0)};
}

}  // namespace distix::testing
