#include "distix/iterative.hpp"

#include <algorithm>
#include <cmath>

namespace distix {

IterSchedule make_schedule(double t, int n) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "iteration count must be at least 1");
  if (!(t > 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "schedule target t must lie in (0, 1]");
  IterSchedule schedule;
  double previous = 0.0;
  for (int i = 0; i < n; ++i) {
    const double target = i + 1 == n ? t : (i + 1) * t / n;
    schedule.steps.push_back({target, previous});
    previous = target;
  }
  return schedule;
}

namespace {

double proximity(double delta) { return 1.0 / (std::abs(delta) + kProximityOffset); }

// Mixing shares of n candidates with coverage min(w, 1) and proximity
// weights. Each candidate keeps its covered part and hands the rest to the
// others by proximity times coverage, the way the two-frame mask does.
// False when nothing covers the pixel.
template <std::size_t N>
bool fuse_shares(const double (&cover)[N], const double (&prox)[N], double (&share)[N]) {
  double total = 0.0;
  for (std::size_t k = 0; k < N; ++k) total += prox[k] * cover[k];
  if (total <= 0.0) return false;
  double norm = 0.0;
  for (std::size_t k = 0; k < N; ++k) share[k] = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    if (cover[k] <= 0.0) continue;
    const double rest = total - prox[k] * cover[k];
    double other_cover = 0.0;
    for (std::size_t j = 0; j < N; ++j)
      if (j != k) other_cover = std::max(other_cover, cover[j]);
    const double own = rest > 0.0 ? cover[k] / (cover[k] + (1.0 - cover[k]) * other_cover) : 1.0;
    share[k] += prox[k] * own;
    if (rest > 0.0) {
      for (std::size_t j = 0; j < N; ++j)
        if (j != k) share[j] += prox[k] * (1.0 - own) * prox[j] * cover[j] / rest;
    }
    norm += prox[k];
  }
  for (std::size_t k = 0; k < N; ++k) share[k] /= norm;
  return true;
}

bool starts_at_first_frame(const RefState& ref, const Frame& i0) {
  const auto d = ref.d_ref.data();
  return std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; }) && ref.i_ref == i0;
}

// Motion of the reference frame's pixels from distance d_ref to d_target,
// expressed on the reference grid. The I0-anchored motion and increment are
// carried forward by d_ref * v01, the I1-anchored ones backward from I1, and
// the two are merged like the endpoint warps.
FlowField reference_motion(const FlowField& v01, const FlowField& v10, const DistanceMap& d_target0,
                           const DistanceMap& d_target1, const DistanceMap& d_ref0, const DistanceMap& d_ref1,
                           const InterpConfig& config) {
  const int h = v01.height();
  const int w = v01.width();
  const std::size_t n = v01.size().pixels();

  std::vector<double> from0(n * 3), from1(n * 3);
  FlowField carry0(h, w), carry1(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = v01.data()[i];
    const Vec2 b = v10.data()[i];
    from0[i * 3 + 0] = a.x;
    from0[i * 3 + 1] = a.y;
    from0[i * 3 + 2] = d_target0.data()[i] - d_ref0.data()[i];
    from1[i * 3 + 0] = -b.x;
    from1[i * 3 + 1] = -b.y;
    from1[i * 3 + 2] = d_target1.data()[i] - d_ref1.data()[i];
    carry0.data()[i] = a * d_ref0.data()[i];
    carry1.data()[i] = b * (1.0 - d_ref1.data()[i]);
  }
  const ImportanceMap imp0 = motion_importance(carry0, config.splat_sharpness);
  const ImportanceMap imp1 = motion_importance(carry1, config.splat_sharpness);
  const FieldSplat s0 = splat_field(from0, 3, carry0, &imp0);
  const FieldSplat s1 = splat_field(from1, 3, carry1, &imp1);

  FlowField motion(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    const double dr = std::clamp(d_ref0.data()[i], 0.0, 1.0);
    const double a = std::min(s0.weight.data()[i], 1.0) * (1.0 - dr);
    const double b = std::min(s1.weight.data()[i], 1.0) * dr;
    double vx = 0.0, vy = 0.0, inc = d_target0.data()[i] - d_ref0.data()[i];
    if (a + b > 0.0) {
      vx = (a * s0.values[i * 3] + b * s1.values[i * 3]) / (a + b);
      vy = (a * s0.values[i * 3 + 1] + b * s1.values[i * 3 + 1]) / (a + b);
      inc = (a * s0.values[i * 3 + 2] + b * s1.values[i * 3 + 2]) / (a + b);
    } else if (s0.weight.data()[i] > 0.0) {
      vx = s0.values[i * 3];
      vy = s0.values[i * 3 + 1];
      inc = s0.values[i * 3 + 2];
    } else if (s1.weight.data()[i] > 0.0) {
      vx = s1.values[i * 3];
      vy = s1.values[i * 3 + 1];
      inc = s1.values[i * 3 + 2];
    }
    motion.data()[i] = Vec2{vx, vy} * inc;
  }
  return motion;
}

}  // namespace

Frame step(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10, const DistanceMap& d_target,
           const RefState& ref, const InterpConfig& config) {
  config.validate();
  require_same_size(i0.size(), i1.size(), "step: frames");
  require_same_size(i0.size(), v01.size(), "step: v01");
  require_same_size(i0.size(), v10.size(), "step: v10");
  require_same_size(i0.size(), d_target.size(), "step: target map");
  require_same_size(i0.size(), ref.i_ref.size(), "step: reference frame");
  require_same_size(i0.size(), ref.d_ref.size(), "step: reference map");
  if (ref.i_ref.channels() != i0.channels()) fail(ErrorKind::DimensionMismatch, "step: reference channel mismatch");
  for (std::size_t i = 0; i < d_target.data().size(); ++i) {
    if (ref.d_ref.data()[i] > d_target.data()[i] + 1e-6) {
      fail(ErrorKind::InvalidArgument, "step: reference distance exceeds target distance");
    }
  }

  if (starts_at_first_frame(ref, i0)) return interpolate(i0, i1, v01, v10, d_target, config);

  const DistanceMap dt0 = clamp01(d_target);
  const DistanceMap dr0 = clamp01(ref.d_ref);
  const DistanceMap dt1 = transport_map(dt0, v01, config.splat_sharpness);
  const DistanceMap dr1 = transport_map(dr0, v01, config.splat_sharpness);

  const ScaledFlows flows = scaled_flows(v01, v10, dt0, dt1);
  const WarpPair pair = warp_endpoints(i0, i1, flows.f0t, flows.f1t, config.splat_sharpness);

  const FlowField ref_motion = reference_motion(v01, v10, dt0, dt1, dr0, dr1, config);
  const SplatResult from_ref =
      forward_warp_splat(ref.i_ref, ref_motion, motion_importance(ref_motion, config.splat_sharpness));

  const int channels = i0.channels();
  Frame out(i0.height(), i0.width(), channels);
  std::vector<unsigned char> hole(out.size().pixels(), 0);
  const double* src[3] = {pair.i_plus.data().data(), pair.i_minus.data().data(), from_ref.frame.data().data()};
  for (std::size_t i = 0; i < hole.size(); ++i) {
    const double dt = dt0.data()[i];
    const double cover[3] = {std::min(pair.w_plus.data()[i], 1.0), std::min(pair.w_minus.data()[i], 1.0),
                             std::min(from_ref.weight.data()[i], 1.0)};
    const double prox[3] = {proximity(dt), proximity(1.0 - dt), proximity(dt - dr0.data()[i])};
    double share[3];
    if (!fuse_shares(cover, prox, share)) {
      hole[i] = 1;
      continue;
    }
    for (int c = 0; c < channels; ++c) {
      const std::size_t k = i * channels + c;
      const double v = share[0] * src[0][k] + share[1] * src[1][k] + share[2] * src[2][k];
      out.data()[k] = std::clamp(v, 0.0, 1.0);
    }
  }
  const Frame fallback = nearer_endpoint(i0, i1, dt0);
  fill_holes(out, hole, &fallback);
  return out;
}

Frame iterative_interpolate(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10, double t,
                            int n, const InterpConfig& config) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "t must lie in [0, 1]");
  if (n < 1) fail(ErrorKind::InvalidArgument, "iteration count must be at least 1");
  return iterative_interpolate(i0, i1, v01, v10, uniform_map(t, i0.height(), i0.width()), n, config);
}

Frame iterative_interpolate(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10,
                            const DistanceMap& target, int n, const InterpConfig& config) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "iteration count must be at least 1");
  require_same_size(i0.size(), target.size(), "iterative_interpolate: target map");
  const auto td = target.data();
  if (std::all_of(td.begin(), td.end(), [](double v) { return v <= 0.0; })) {
    return interpolate(i0, i1, v01, v10, target, config);
  }

  RefState ref{i0, DistanceMap(target.height(), target.width(), 0.0)};
  Frame frame;
  for (int i = 0; i < n; ++i) {
    DistanceMap d_step = target;
    if (i + 1 < n) {
      for (double& v : d_step.data()) v = v * (i + 1) / n;
    }
    frame = step(i0, i1, v01, v10, d_step, ref, config);
    ref = {frame, std::move(d_step)};
  }
  return frame;
}

}  // namespace distix
