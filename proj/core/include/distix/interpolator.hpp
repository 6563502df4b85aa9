#pragma once

// Two-frame distance-driven interpolation: I_t = F(I0, I1, D_t).
//
// Flows are source-anchored: v01 lives on I0's grid, v10 on I1's grid. The
// distance map is anchored on I0's grid and carried onto I1's grid before
// the I1 side is scaled, so a per-pixel map moves the content it describes.

#include <utility>
#include <vector>

#include "distix/imaging.hpp"
#include "distix/indexing.hpp"

namespace distix {

enum class MaskMode { SplatWeight, Photometric, Fixed };

const char* to_string(MaskMode mode);
MaskMode parse_mask_mode(const std::string& name);

struct InterpConfig {
  double eps = kDefaultFlowEps;
  MaskMode mask_mode = MaskMode::SplatWeight;
  double photometric_sigma = 0.1;
  double fixed_alpha = 0.5;
  // Importance of moving content over static content when splats collide;
  // 0 reduces to plain averaging splats.
  double splat_sharpness = 4.0;

  void validate() const;
};

struct WarpPair {
  Frame i_plus;   // I0 carried to t
  Frame i_minus;  // I1 carried to t
  WeightMap w_plus;
  WeightMap w_minus;
};

struct ScaledFlows {
  FlowField f0t;
  FlowField f1t;
};

// f0t = d * v01, f1t = (1 - d) * v10, with d read on each flow's own grid.
ScaledFlows scaled_flows(const FlowField& v01, const FlowField& v10, const DistanceMap& d);
ScaledFlows scaled_flows(const FlowField& v01, const FlowField& v10, const DistanceMap& d_on_i0,
                         const DistanceMap& d_on_i1);

WarpPair warp_endpoints(const Frame& i0, const Frame& i1, const FlowField& f0t, const FlowField& f1t,
                        double splat_sharpness = InterpConfig{}.splat_sharpness);

// Weight of i_plus in the blend.
MaskImage occlusion_mask(const WarpPair& pair, const InterpConfig& config, const DistanceMap& d);

// M * I+ + (1 - M) * I-. A pixel with only one splatted side takes that
// side; pixels with neither are filled from neighbours (two passes) and then
// from `fallback` when given, else left at 0.
Frame blend_two(const WarpPair& pair, const MaskImage& m);
Frame blend_two(const WarpPair& pair, const MaskImage& m, const Frame& fallback);

// Per pixel: I0 where d <= 0.5, otherwise I1.
Frame nearer_endpoint(const Frame& i0, const Frame& i1, const DistanceMap& d);

// Fills pixels flagged in `hole` with the mean of their non-hole 4-neighbours,
// `passes` times, then copies the rest from `fallback` (if non-null).
// Returns the number of pixels still unfilled.
std::size_t fill_holes(Frame& frame, std::vector<unsigned char>& hole, const Frame* fallback, int passes = 2);

Frame interpolate(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10,
                  const DistanceMap& d, const InterpConfig& config = {});

}  // namespace distix
