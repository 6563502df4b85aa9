#pragma once

// Per-object re-timing: distance curves d(t) painted over binary masks give
// a distance map per output time, which drives the interpolator.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "distix/interpolator.hpp"

namespace distix::retime {

enum class CurveKind { Linear, PiecewiseLinear, CubicBezier };

const char* to_string(CurveKind kind);
CurveKind parse_curve_kind(const std::string& name);

struct CurvePoint {
  double t = 0.0;
  double d = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

// Bisection tolerance on t when inverting a Bezier segment.
inline constexpr double kBezierTolerance = 1e-6;

// Control points with t strictly increasing from 0 to 1 and d in [0, 1].
// Linear takes exactly the two endpoints; cubic Bezier takes 3k + 1 points
// (endpoint, two handles, endpoint, ...). d need not be monotone.
struct DistanceCurve {
  CurveKind kind = CurveKind::Linear;
  std::vector<CurvePoint> points{{0.0, 0.0}, {1.0, 1.0}};

  // Throws InvalidArgument naming the first offending point.
  void validate() const;
  double eval(double t) const;

  static DistanceCurve identity() { return {}; }
  static DistanceCurve freeze(double d) { return {CurveKind::Linear, {{0.0, d}, {1.0, d}}}; }
  static DistanceCurve reverse() { return {CurveKind::Linear, {{0.0, 1.0}, {1.0, 0.0}}}; }
};

double eval_curve(const DistanceCurve& curve, double t);

enum class OverlapRule { LastWins, Priority };

const char* to_string(OverlapRule rule);
OverlapRule parse_overlap_rule(const std::string& name);

struct Layer {
  std::string name;  // mask reference as written in the script
  MaskImage mask;    // binary
  DistanceCurve curve;
  int priority = 0;  // used by OverlapRule::Priority, higher paints later
};

inline constexpr double kDefaultFeather = 3.0;

struct RetimeScript {
  std::vector<Layer> layers;
  DistanceCurve background;
  OverlapRule overlap = OverlapRule::LastWins;
  // Width in px of the linear ramp inside each mask border; 0 paints hard.
  double feather = 0.0;

  void validate(Size canvas) const;
};

// 1 where luma >= 0.5, else 0.
MaskImage binarize_mask(const Frame& frame);
MaskImage binarize_mask(const MaskImage& mask);

DistanceMap compose_maps(const RetimeScript& script, double t, int height, int width);

// Looks up a mask by the name used in the script; nullopt when absent.
using MaskResolver = std::function<std::optional<MaskImage>(const std::string&)>;

// Parses `{layers:[{mask, curve:{kind, points}, priority?}], background?,
// overlap?, feather?}`. Errors: Format for malformed JSON or schema,
// InvalidArgument for curve violations, Io for unresolved masks.
RetimeScript parse_script(const std::string& json_text, const MaskResolver& resolve);

// JSON form of a curve, `{kind, points:[[t,d],...]}`.
std::string curve_to_json(const DistanceCurve& curve);

// Per-layer summary: name, kind, t domain and the d range over a dense grid.
std::string validation_report(const RetimeScript& script);

struct RenderJob {
  Frame i0;
  Frame i1;
  FlowField v01;
  FlowField v10;
  RetimeScript script;
  std::vector<double> timesteps;
  int iters = 1;
  InterpConfig config;
  int threads = 1;
};

// One output frame at time t.
Frame render_at(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10,
                const RetimeScript& script, double t, int iters, const InterpConfig& config = {});

// Frames in timestep order; timesteps may be rendered in parallel.
std::vector<Frame> render_retimed(const RenderJob& job);

}  // namespace distix::retime
