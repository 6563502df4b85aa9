#pragma once

// Distance indexing: per-pixel ratios of how far content has travelled
// along its total inter-frame motion.

#include <filesystem>

#include "distix/image_io.hpp"
#include "distix/imaging.hpp"

namespace distix {

struct DistanceTag {};
using DistanceMap = Plane<DistanceTag>;

struct TwoChannelDistance {
  DistanceMap dx;
  DistanceMap dy;
};

inline constexpr double kDefaultFlowEps = 1e-3;
// Ratio assigned where the total motion is below eps.
inline constexpr double kStationaryDistance = 0.5;

// D = (v0t . v01) / max(|v01|^2, eps^2): the projection of v0t onto v01
// divided by |v01|. Pixels with |v01| < eps get kStationaryDistance.
DistanceMap distance_map_from_flows(const FlowField& v0t, const FlowField& v01, double eps = kDefaultFlowEps,
                                    bool clamp = true);

// Constant-speed inference map: every pixel equals t.
DistanceMap uniform_map(double t, int height, int width);

// Per-axis ratios u0t/u01 and v0t/v01, clamped to [0, 1]. An axis whose
// total motion is below eps falls back to the scalar projection ratio.
TwoChannelDistance two_channel_distance(const FlowField& v0t, const FlowField& v01, double eps = kDefaultFlowEps);

// True when every pixel holds the same value.
bool is_uniform(const DistanceMap& map);

DistanceMap clamp01(DistanceMap map);

// Carries a map anchored on one frame's grid along `flow` onto the grid
// it points to. Uncovered pixels keep the source map's value at that pixel.
DistanceMap transport_map(const DistanceMap& map, const FlowField& flow, double splat_sharpness);

// Grayscale PFM ("Pf", negative scale = little-endian, rows bottom-to-top).
DistanceMap decode_pfm(std::span<const std::uint8_t> bytes);
Bytes encode_pfm(const DistanceMap& map);
DistanceMap read_pfm(const std::filesystem::path& path);
void write_pfm(const DistanceMap& map, const std::filesystem::path& path);

// Perceptual blue-to-yellow ramp over [0, 1] for quick inspection.
Frame visualize_map(const DistanceMap& map);

}  // namespace distix
