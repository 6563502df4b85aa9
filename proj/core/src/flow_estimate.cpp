#include "distix/flow_estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace distix {

namespace {

std::vector<double> luma_plane(const Frame& f) {
  std::vector<double> out(f.size().pixels());
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) out[static_cast<std::size_t>(y) * f.width() + x] = f.luma(y, x);
  return out;
}

// Offset of the minimum of a parabola through (-1, a), (0, b), (1, c).
double parabola_offset(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (den <= 1e-12) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

}  // namespace

FlowField block_match(const Frame& from, const Frame& to, const BlockMatchOptions& options) {
  require_same_size(from.size(), to.size(), "block_match");
  if (options.radius < 0 || options.block < 0) fail(ErrorKind::InvalidArgument, "block_match: negative window");
  const int h = from.height();
  const int w = from.width();
  const std::vector<double> a = luma_plane(from);
  const std::vector<double> b = luma_plane(to);
  auto at = [&](const std::vector<double>& p, int y, int x) {
    return p[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  const int r = options.radius;
  const int side = 2 * r + 1;

  FlowField flow(h, w);
  std::vector<double> cost(static_cast<std::size_t>(side) * side);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best_dx = 0, best_dy = 0;
      double best = std::numeric_limits<double>::infinity();
      int best_len = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          double sad = 0.0;
          for (int by = -options.block; by <= options.block; ++by)
            for (int bx = -options.block; bx <= options.block; ++bx) {
              sad += std::abs(at(a, y + by, x + bx) - at(b, y + dy + by, x + dx + bx));
            }
          cost[static_cast<std::size_t>(dy + r) * side + dx + r] = sad;
          const int len = dx * dx + dy * dy;
          if (sad < best - 1e-12 || (std::abs(sad - best) <= 1e-12 && len < best_len)) {
            best = sad;
            best_dx = dx;
            best_dy = dy;
            best_len = len;
          }
        }
      Vec2 v{static_cast<double>(best_dx), static_cast<double>(best_dy)};
      if (options.subpixel) {
        auto c = [&](int dy, int dx) { return cost[static_cast<std::size_t>(dy + r) * side + dx + r]; };
        if (best_dx > -r && best_dx < r) v.x += parabola_offset(c(best_dy, best_dx - 1), best, c(best_dy, best_dx + 1));
        if (best_dy > -r && best_dy < r) v.y += parabola_offset(c(best_dy - 1, best_dx), best, c(best_dy + 1, best_dx));
      }
      flow.at(y, x) = v;
    }
  return flow;
}

}  // namespace distix
