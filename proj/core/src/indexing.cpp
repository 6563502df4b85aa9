#include "distix/indexing.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>

namespace distix {

namespace {

void require_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) fail(ErrorKind::InvalidArgument, "eps must be positive");
}

double projection_ratio(Vec2 v0t, Vec2 v01, double eps) {
  const double n2 = v01.norm2();
  if (n2 < eps * eps) return kStationaryDistance;
  return v0t.dot(v01) / std::max(n2, eps * eps);
}

}  // namespace

DistanceMap distance_map_from_flows(const FlowField& v0t, const FlowField& v01, double eps, bool clamp) {
  require_same_size(v0t.size(), v01.size(), "distance_map_from_flows");
  require_eps(eps);
  DistanceMap out(v01.height(), v01.width());
  auto a = v0t.data();
  auto b = v01.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    double d = projection_ratio(a[i], b[i], eps);
    if (clamp) d = std::clamp(d, 0.0, 1.0);
    dst[i] = d;
  }
  return out;
}

DistanceMap uniform_map(double t, int height, int width) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "uniform_map: t must lie in [0, 1]");
  return DistanceMap(height, width, t);
}

TwoChannelDistance two_channel_distance(const FlowField& v0t, const FlowField& v01, double eps) {
  require_same_size(v0t.size(), v01.size(), "two_channel_distance");
  require_eps(eps);
  TwoChannelDistance out{DistanceMap(v01.height(), v01.width()), DistanceMap(v01.height(), v01.width())};
  auto a = v0t.data();
  auto b = v01.data();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double scalar = projection_ratio(a[i], b[i], eps);
    const double dx = std::abs(b[i].x) >= eps ? a[i].x / b[i].x : scalar;
    const double dy = std::abs(b[i].y) >= eps ? a[i].y / b[i].y : scalar;
    out.dx.data()[i] = std::clamp(dx, 0.0, 1.0);
    out.dy.data()[i] = std::clamp(dy, 0.0, 1.0);
  }
  return out;
}

bool is_uniform(const DistanceMap& map) {
  auto d = map.data();
  return std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); });
}

DistanceMap clamp01(DistanceMap map) {
  for (double& v : map.data()) v = std::clamp(v, 0.0, 1.0);
  return map;
}

DistanceMap transport_map(const DistanceMap& map, const FlowField& flow, double splat_sharpness) {
  require_same_size(map.size(), flow.size(), "transport_map");
  if (is_uniform(map)) return map;
  const ImportanceMap importance = motion_importance(flow, splat_sharpness);
  FieldSplat moved = splat_field(map.data(), 1, flow, &importance);
  DistanceMap out = map;
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (moved.weight.data()[i] > 0.0) dst[i] = moved.values[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// PFM

namespace {

std::string read_token(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
  std::string token;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) token.push_back(static_cast<char>(bytes[pos++]));
  return token;
}

float read_float(std::span<const std::uint8_t> bytes, std::size_t offset, bool little_endian) {
  std::uint32_t u;
  std::memcpy(&u, bytes.data() + offset, 4);
  const bool swap = little_endian != (std::endian::native == std::endian::little);
  if (swap) u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u >> 8) & 0xff00u) | (u >> 24);
  return std::bit_cast<float>(u);
}

}  // namespace

DistanceMap decode_pfm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  const std::string magic = read_token(bytes, pos);
  if (magic == "PF") fail(ErrorKind::Format, "unsupported PFM format: color (PF) maps are not distance maps");
  if (magic != "Pf") fail(ErrorKind::Format, "bad PFM header (expected 'Pf')");
  long long w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoll(read_token(bytes, pos));
    h = std::stoll(read_token(bytes, pos));
    scale = std::stod(read_token(bytes, pos));
  } catch (const std::exception&) {
    fail(ErrorKind::Format, "bad PFM header");
  }
  if (w <= 0 || h <= 0 || w > (1 << 15) || h > (1 << 15)) fail(ErrorKind::Format, "bad PFM dimensions");
  if (scale == 0.0 || !std::isfinite(scale)) fail(ErrorKind::Format, "bad PFM scale");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(ErrorKind::Format, "bad PFM header");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos + n * 4) fail(ErrorKind::Format, "truncated PFM payload");
  DistanceMap map(static_cast<int>(h), static_cast<int>(w));
  for (int row = 0; row < h; ++row) {
    const int y = static_cast<int>(h) - 1 - row;
    for (int x = 0; x < w; ++x) {
      const float v = read_float(bytes, pos + (static_cast<std::size_t>(row) * w + x) * 4, scale < 0.0);
      if (!std::isfinite(v)) fail(ErrorKind::Format, "PFM contains non-finite values");
      map.at(y, x) = v;
    }
  }
  return map;
}

Bytes encode_pfm(const DistanceMap& map) {
  if (map.empty()) fail(ErrorKind::InvalidArgument, "cannot encode an empty map");
  const std::string header = "Pf\n" + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n-1.0\n";
  Bytes out(header.begin(), header.end());
  out.reserve(header.size() + map.data().size() * 4);
  for (int y = map.height() - 1; y >= 0; --y) {
    for (int x = 0; x < map.width(); ++x) le::put_f32(out, static_cast<float>(map.at(y, x)));
  }
  return out;
}

DistanceMap read_pfm(const std::filesystem::path& path) {
  const Bytes bytes = read_file_bytes(path);
  try {
    return decode_pfm(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_pfm(const DistanceMap& map, const std::filesystem::path& path) { write_file_bytes(path, encode_pfm(map)); }

Frame visualize_map(const DistanceMap& map) {
  static constexpr std::array<std::array<double, 3>, 5> stops = {{
      {0.267, 0.005, 0.329},
      {0.229, 0.322, 0.546},
      {0.128, 0.567, 0.551},
      {0.369, 0.789, 0.383},
      {0.993, 0.906, 0.144},
  }};
  Frame out(map.height(), map.width(), 3);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const double s = std::clamp(map.at(y, x), 0.0, 1.0) * (stops.size() - 1);
      const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(s), stops.size() - 2);
      const double f = s - i;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = stops[i][c] + f * (stops[i + 1][c] - stops[i][c]);
    }
  }
  return out;
}

}  // namespace distix
