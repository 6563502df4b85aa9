#include "distix/imaging.hpp"

#include <algorithm>
#include <cmath>

namespace distix {

std::string to_string(Size size) { return std::to_string(size.height) + "x" + std::to_string(size.width); }

void require_same_size(Size a, Size b, const char* what) {
  if (a != b) {
    fail(ErrorKind::DimensionMismatch,
         std::string(what) + ": dimension mismatch (" + to_string(a) + " vs " + to_string(b) + ")");
  }
}

namespace {

std::size_t frame_length(int height, int width, int channels) {
  if (height <= 0 || width <= 0) {
    fail(ErrorKind::InvalidArgument, "frame dimensions must be positive");
  }
  if (channels != 1 && channels != 3) {
    fail(ErrorKind::InvalidArgument, "frame must have 1 or 3 channels, got " + std::to_string(channels));
  }
  return static_cast<std::size_t>(height) * width * channels;
}

}  // namespace

Frame::Frame(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels), data_(frame_length(height, width, channels), fill) {}

Frame::Frame(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (data_.size() != frame_length(height, width, channels)) {
    fail(ErrorKind::InvalidArgument, "frame data length does not match dimensions");
  }
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      fail(ErrorKind::InvalidArgument, "frame values must be finite and within [0, 1]");
    }
  }
}

double Frame::luma(int y, int x) const {
  double sum = 0.0;
  for (int c = 0; c < channels_; ++c) sum += at(y, x, c);
  return sum / channels_;
}

Frame Frame::to_gray() const {
  if (channels_ == 1) return *this;
  Frame out(height_, width_, 1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) out.at(y, x) = luma(y, x);
  return out;
}

FlowField::FlowField(int height, int width, Vec2 fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    fail(ErrorKind::InvalidArgument, "flow dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

FlowField operator*(const FlowField& flow, double s) {
  FlowField out = flow;
  for (Vec2& v : out.data()) v = v * s;
  return out;
}

FlowField operator-(const FlowField& a, const FlowField& b) {
  require_same_size(a.size(), b.size(), "flow difference");
  FlowField out = a;
  auto rhs = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = dst[i] - rhs[i];
  return out;
}

FlowField negate(const FlowField& flow) { return flow * -1.0; }

Color bilinear_sample(const Frame& frame, double x, double y) {
  const int w = frame.width();
  const int h = frame.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;

  Color out{};
  for (int c = 0; c < frame.channels(); ++c) {
    const double top = frame.at(y0, x0, c) + fx * (frame.at(y0, x1, c) - frame.at(y0, x0, c));
    const double bottom = frame.at(y1, x0, c) + fx * (frame.at(y1, x1, c) - frame.at(y1, x0, c));
    out[c] = top + fy * (bottom - top);
  }
  return out;
}

Frame backward_warp(const Frame& frame, const FlowField& flow) {
  require_same_size(frame.size(), flow.size(), "backward_warp");
  Frame out(frame.height(), frame.width(), frame.channels());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const Vec2 d = flow.at(y, x);
      const Color c = bilinear_sample(frame, x + d.x, y + d.y);
      for (int k = 0; k < frame.channels(); ++k) out.at(y, x, k) = c[k];
    }
  }
  return out;
}

namespace {

// Calls land(src, dst, bilinear_weight) for every in-bounds landing.
template <typename F>
void for_each_landing(const FlowField& flow, F&& land) {
  const int h = flow.height();
  const int w = flow.width();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec2 d = flow.at(y, x);
      const double tx = x + d.x;
      const double ty = y + d.y;
      if (!std::isfinite(tx) || !std::isfinite(ty)) continue;
      const double fx0 = std::floor(tx);
      const double fy0 = std::floor(ty);
      // Far outside the canvas: nothing lands.
      if (fx0 < -1.0 || fy0 < -1.0 || fx0 > w || fy0 > h) continue;
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      const double ax = tx - fx0;
      const double ay = ty - fy0;
      const std::size_t src = static_cast<std::size_t>(y) * w + x;
      const int nx[2] = {x0, x0 + 1};
      const int ny[2] = {y0, y0 + 1};
      const double wx[2] = {1.0 - ax, ax};
      const double wy[2] = {1.0 - ay, ay};
      for (int j = 0; j < 2; ++j) {
        if (ny[j] < 0 || ny[j] >= h || wy[j] == 0.0) continue;
        for (int i = 0; i < 2; ++i) {
          if (nx[i] < 0 || nx[i] >= w || wx[i] == 0.0) continue;
          land(src, static_cast<std::size_t>(ny[j]) * w + nx[i], wx[i] * wy[j]);
        }
      }
    }
  }
}

struct Landing {
  double importance;
  double weight;
  std::size_t src;
};

// Front-to-back compositing of importance layers at one target pixel. Each
// layer gets at most the coverage the layers in front of it left over, so a
// full foreground hides what is behind it, while a sliver of foreground
// mostly does not. Returns the coverage used.
double composite(std::vector<Landing>& landings, std::span<const double> values, int channels, double* out) {
  std::stable_sort(landings.begin(), landings.end(),
                   [](const Landing& a, const Landing& b) { return a.importance > b.importance; });
  for (int c = 0; c < channels; ++c) out[c] = 0.0;
  double remaining = 1.0;
  double used = 0.0;
  std::size_t k = 0;
  while (k < landings.size() && remaining > 0.0) {
    const double lead = landings[k].importance;
    if (!(lead > 0.0)) break;
    std::size_t end = k;
    double mass = 0.0;
    while (end < landings.size() && landings[end].importance > lead * kSplatLayerRatio) mass += landings[end++].weight;
    const double take = std::min(mass, remaining) / mass;
    for (; k < end; ++k) {
      const double wgt = landings[k].weight * take;
      for (int c = 0; c < channels; ++c) out[c] += wgt * values[landings[k].src * channels + c];
      used += wgt;
    }
    remaining -= mass * take;
  }
  if (used > 0.0) {
    for (int c = 0; c < channels; ++c) out[c] /= used;
  }
  return used;
}

}  // namespace

FieldSplat splat_field(std::span<const double> values, int channels, const FlowField& flow,
                       const ImportanceMap* importance, double hole_value) {
  const std::size_t n = flow.size().pixels();
  if (values.size() != n * channels) {
    fail(ErrorKind::DimensionMismatch, "splat_field: value count does not match flow grid");
  }
  if (importance != nullptr) require_same_size(importance->size(), flow.size(), "splat importance");

  std::vector<double> acc(n * channels, 0.0);
  WeightMap mass(flow.height(), flow.width());

  if (importance == nullptr) {
    for_each_landing(flow, [&](std::size_t src, std::size_t dst, double bw) {
      mass.data()[dst] += bw;
      for (int c = 0; c < channels; ++c) acc[dst * channels + c] += bw * values[src * channels + c];
    });
    for (std::size_t i = 0; i < n; ++i) {
      if (mass.data()[i] > kSplatHoleThreshold) {
        for (int c = 0; c < channels; ++c) acc[i * channels + c] /= mass.data()[i];
      } else {
        mass.data()[i] = 0.0;
        for (int c = 0; c < channels; ++c) acc[i * channels + c] = hole_value;
      }
    }
    return {std::move(acc), std::move(mass)};
  }

  // Bucket the landings by target pixel.
  std::vector<std::size_t> start(n + 1, 0);
  for_each_landing(flow, [&](std::size_t, std::size_t dst, double) { ++start[dst + 1]; });
  for (std::size_t i = 0; i < n; ++i) start[i + 1] += start[i];
  std::vector<Landing> landings(start[n]);
  std::vector<std::size_t> fill(start.begin(), start.end() - 1);
  for_each_landing(flow, [&](std::size_t src, std::size_t dst, double bw) {
    mass.data()[dst] += bw;
    landings[fill[dst]++] = {importance->data()[src], bw, src};
  });

  std::vector<Landing> here;
  for (std::size_t i = 0; i < n; ++i) {
    double* out = acc.data() + i * channels;
    here.assign(landings.begin() + static_cast<std::ptrdiff_t>(start[i]),
                landings.begin() + static_cast<std::ptrdiff_t>(start[i + 1]));
    const double used = mass.data()[i] > kSplatHoleThreshold ? composite(here, values, channels, out) : 0.0;
    if (used <= 0.0) {
      mass.data()[i] = 0.0;
      for (int c = 0; c < channels; ++c) out[c] = hole_value;
    }
  }
  return {std::move(acc), std::move(mass)};
}

namespace {

SplatResult splat_frame(const Frame& frame, const FlowField& flow, const ImportanceMap* importance) {
  require_same_size(frame.size(), flow.size(), "forward_warp_splat");
  FieldSplat s = splat_field(frame.data(), frame.channels(), flow, importance, 0.0);
  // Normalized convex combinations of [0, 1] values; clamp away rounding.
  for (double& v : s.values) v = std::clamp(v, 0.0, 1.0);
  return {Frame(frame.height(), frame.width(), frame.channels(), std::move(s.values)), std::move(s.weight)};
}

}  // namespace

SplatResult forward_warp_splat(const Frame& frame, const FlowField& flow) { return splat_frame(frame, flow, nullptr); }

SplatResult forward_warp_splat(const Frame& frame, const FlowField& flow, const ImportanceMap& importance) {
  return splat_frame(frame, flow, &importance);
}

ImportanceMap motion_importance(const FlowField& flow, double sharpness) {
  ImportanceMap out(flow.height(), flow.width(), 1.0);
  if (sharpness == 0.0) return out;
  auto src = flow.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double mag = std::sqrt(src[i].norm2());
    dst[i] = std::exp(std::min(sharpness * mag, 40.0));
  }
  return out;
}

}  // namespace distix
