#pragma once

// Iterative reference-based estimation: a long-range prediction at t is
// split into n chained steps at (i+1)t/n, each anchored on the previous
// step's output and distance map, with both endpoints always taking part.

#include <vector>

#include "distix/interpolator.hpp"

namespace distix {

struct IterStep {
  double d_target = 0.0;
  double d_ref = 0.0;

  friend bool operator==(const IterStep&, const IterStep&) = default;
};

struct IterSchedule {
  std::vector<IterStep> steps;

  int n() const { return static_cast<int>(steps.size()); }
};

struct RefState {
  Frame i_ref;
  DistanceMap d_ref;
};

inline constexpr int kDefaultIterations = 2;
// Added to |delta d| in the proximity kernel 1 / (|delta d| + offset).
inline constexpr double kProximityOffset = 0.05;

// Steps at (i+1) t / n, each referencing the previous target; the last
// target is t itself. Requires 0 < t <= 1 and n >= 1.
IterSchedule make_schedule(double t, int n);

// One reference-anchored step. When the reference is the start frame at
// distance 0 the step is exactly the two-frame interpolation.
Frame step(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10, const DistanceMap& d_target,
           const RefState& ref, const InterpConfig& config = {});

// Scalar target t in [0, 1]; t = 0 or n = 1 is the direct interpolation.
Frame iterative_interpolate(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10, double t,
                            int n, const InterpConfig& config = {});

// Per-pixel target map; step i targets target * (i+1) / n.
Frame iterative_interpolate(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10,
                            const DistanceMap& target, int n, const InterpConfig& config = {});

}  // namespace distix
