#pragma once

// Multi-frame continuous motion: per-pixel cubic B-spline trajectories
// fitted to flows from four frames, dense distance maps derived from them,
// and the three-way refinement blend with the outer frames.
//
// Time is normalized so that frames I-1, I0, I1, I2 sit at -1, 0, 1, 2
// (constant frame interval). Trajectories are anchored at I0's pixel grid.

#include <optional>
#include <vector>

#include "distix/interpolator.hpp"

namespace distix::spline {

class SplineBasis {
 public:
  // Clamped uniform knots over [t_begin, t_end] for n_ctrl control points.
  explicit SplineBasis(int n_ctrl = 4, int degree = 3, double t_begin = -1.0, double t_end = 2.0);

  int degree() const { return degree_; }
  int n_ctrl() const { return n_ctrl_; }
  double t_begin() const { return knots_.front(); }
  double t_end() const { return knots_.back(); }
  const std::vector<double>& knots() const { return knots_; }

  // Cox-de Boor evaluation of all n_ctrl basis functions at t.
  std::vector<double> eval(double t) const;

 private:
  int n_ctrl_;
  int degree_;
  std::vector<double> knots_;
};

// Convenience form of SplineBasis::eval.
std::vector<double> basis_eval(const SplineBasis& basis, double t);

struct MultiFrameSet {
  Frame i_minus1;
  Frame i0;
  Frame i1;
  Frame i2;
  FlowField v0_to_minus1;
  FlowField v0_to_1;
  FlowField v0_to_2;

  void validate() const;
};

class SplineTrajectory {
 public:
  SplineTrajectory(SplineBasis basis, int height, int width);

  const SplineBasis& basis() const { return basis_; }
  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }

  // Control point i of pixel (y, x), in pixels.
  Vec2& control(int y, int x, int i) { return controls_[index(y, x) + i]; }
  const Vec2& control(int y, int x, int i) const { return controls_[index(y, x) + i]; }

  // Pixels whose solve failed and carry the linear-motion fallback.
  std::vector<unsigned char>& flagged() { return flagged_; }
  const std::vector<unsigned char>& flagged() const { return flagged_; }
  std::size_t flagged_count() const;

 private:
  std::size_t index(int y, int x) const {
    return (static_cast<std::size_t>(y) * width_ + x) * static_cast<std::size_t>(basis_.n_ctrl());
  }

  SplineBasis basis_;
  int height_;
  int width_;
  std::vector<Vec2> controls_;
  std::vector<unsigned char> flagged_;
};

struct FitOptions {
  // Row scale of the t = 0 observation (displacement 0) in the least squares.
  double anchor_weight = 100.0;
  double ridge = 1e-8;
  int n_ctrl = 4;
};

// Per pixel: min_P sum_j |sum_i B_i(t_j) P_i - V(t_j)|^2 + ridge |P|^2 over
// observations at t = -1, 0, 1, 2 (the t = 0 row anchored at zero motion).
SplineTrajectory fit_trajectory(const MultiFrameSet& set, const FitOptions& options = {});

// Sum_i B_i(t) P_i per pixel, t in the basis domain.
FlowField eval_flow(const SplineTrajectory& trajectory, double t);

// Distance map relative to I0/I1 from the trajectory's V0->t, clamped.
DistanceMap dense_distance_map(const SplineTrajectory& trajectory, double t, const FlowField& v01,
                               double eps = kDefaultFlowEps);

// Position of time-t content within the I-1 -> I2 span, from the
// trajectory: projection of V(t) - V(-1) onto V(2) - V(-1). Not clamped;
// values outside [0, 1] mark motion that leaves the outer segment.
DistanceMap outer_distance_map(const SplineTrajectory& trajectory, double t, double eps = kDefaultFlowEps);

// Constant-speed remap of an I0/I1 ratio into the outer span: (d + 1) / 3.
DistanceMap remap_distance_to_outer(const DistanceMap& d);

struct ThreeWayMask {
  MaskImage m1;  // outer warp of I-1
  MaskImage m2;  // inner two-frame estimate
  MaskImage m3;  // outer warp of I2
};

inline constexpr double kInnerBaselineWeight = 0.5;
// Outer warps whose straight-line landing misses the fitted position at t by
// this many pixels get no weight.
inline constexpr double kOuterPathTolerance = 0.5;

struct OuterFlows {
  FlowField v_minus1_to_2;  // on I-1's grid
  FlowField v_2_to_minus1;  // on I2's grid
};

// Moves the I0-anchored displacement V0->2 - V0->-1 onto the I-1 and I2
// grids. Pixels not reached from I0 are treated as stationary.
OuterFlows derive_outer_flows(const MultiFrameSet& set, double splat_sharpness);

// I'_t = M1 * I'+ + M2 * I_t + M3 * I'-.
Frame blend_three(const Frame& outer_plus, const Frame& inner, const Frame& outer_minus, const ThreeWayMask& mask);

struct RefineResult {
  Frame frame;
  ThreeWayMask mask;
};

// Warps I-1 forward by d' * V-1->2 and I2 backward by (1 - d') * V2->-1,
// weighs them by splat mass and proximity in the outer span against the
// inner estimate's baseline weight, and blends the three. `d_prime` is
// anchored on I0's grid and `t` is the time of `i_t`. The fitted trajectory
// at t tells where the straight outer warps would land wrong (curved or
// reversing paths); those pixels keep the inner estimate. Outer flows are
// derived from the set when not supplied.
RefineResult refine_multiframe(const MultiFrameSet& set, double t, const DistanceMap& d_prime, const Frame& i_t,
                               const std::optional<OuterFlows>& outer = std::nullopt,
                               const InterpConfig& config = {});

}  // namespace distix::spline
