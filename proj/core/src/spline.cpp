#include "distix/spline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace distix::spline {

SplineBasis::SplineBasis(int n_ctrl, int degree, double t_begin, double t_end) : n_ctrl_(n_ctrl), degree_(degree) {
  if (degree < 1) fail(ErrorKind::InvalidArgument, "spline degree must be at least 1");
  if (n_ctrl < degree + 1) fail(ErrorKind::InvalidArgument, "spline needs at least degree + 1 control points");
  if (!(t_end > t_begin)) fail(ErrorKind::InvalidArgument, "spline domain must be nonempty");
  const int interior = n_ctrl - degree - 1;
  knots_.assign(degree + 1, t_begin);
  for (int i = 1; i <= interior; ++i) knots_.push_back(t_begin + (t_end - t_begin) * i / (interior + 1));
  knots_.insert(knots_.end(), degree + 1, t_end);
}

std::vector<double> SplineBasis::eval(double t) const {
  constexpr double kSlack = 1e-12;
  if (!(t >= t_begin() - kSlack && t <= t_end() + kSlack)) {
    fail(ErrorKind::Domain, "spline evaluation outside [" + std::to_string(t_begin()) + ", " +
                                std::to_string(t_end()) + "]: " + std::to_string(t));
  }
  t = std::clamp(t, t_begin(), t_end());
  const int m = static_cast<int>(knots_.size()) - 1;  // number of degree-0 intervals

  // Degree 0: indicator of the half-open span containing t; the right end
  // of the domain belongs to the last nonempty span.
  std::vector<double> n(m, 0.0);
  int span = -1;
  for (int i = 0; i < m; ++i) {
    if (knots_[i] <= t && t < knots_[i + 1]) {
      span = i;
      break;
    }
  }
  if (span < 0) {
    for (int i = m - 1; i >= 0; --i) {
      if (knots_[i] < knots_[i + 1]) {
        span = i;
        break;
      }
    }
  }
  n[span] = 1.0;

  for (int k = 1; k <= degree_; ++k) {
    for (int i = 0; i + k < m; ++i) {
      double value = 0.0;
      const double left_den = knots_[i + k] - knots_[i];
      if (left_den > 0.0) value += (t - knots_[i]) / left_den * n[i];
      const double right_den = knots_[i + k + 1] - knots_[i + 1];
      if (right_den > 0.0) value += (knots_[i + k + 1] - t) / right_den * n[i + 1];
      n[i] = value;
    }
  }
  n.resize(n_ctrl_);
  return n;
}

std::vector<double> basis_eval(const SplineBasis& basis, double t) { return basis.eval(t); }

void MultiFrameSet::validate() const {
  const Size s = i0.size();
  require_same_size(s, i_minus1.size(), "multi-frame set: I-1");
  require_same_size(s, i1.size(), "multi-frame set: I1");
  require_same_size(s, i2.size(), "multi-frame set: I2");
  require_same_size(s, v0_to_minus1.size(), "multi-frame set: V0->-1");
  require_same_size(s, v0_to_1.size(), "multi-frame set: V0->1");
  require_same_size(s, v0_to_2.size(), "multi-frame set: V0->2");
  if (i_minus1.channels() != i0.channels() || i1.channels() != i0.channels() || i2.channels() != i0.channels()) {
    fail(ErrorKind::DimensionMismatch, "multi-frame set: channel counts differ");
  }
}

SplineTrajectory::SplineTrajectory(SplineBasis basis, int height, int width)
    : basis_(std::move(basis)), height_(height), width_(width) {
  if (height <= 0 || width <= 0) fail(ErrorKind::InvalidArgument, "trajectory dimensions must be positive");
  controls_.assign(static_cast<std::size_t>(height) * width * basis_.n_ctrl(), Vec2{});
  flagged_.assign(static_cast<std::size_t>(height) * width, 0);
}

std::size_t SplineTrajectory::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged_.begin(), flagged_.end(), 1));
}

namespace {

using Matrix = std::vector<std::vector<double>>;

// In-place Cholesky factor (lower triangle). False when not positive definite.
bool cholesky(Matrix& a) {
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j][j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j][k] * a[j][k];
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    a[j][j] = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i][j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i][k] * a[j][k];
      a[i][j] = v / a[j][j];
    }
  }
  return true;
}

std::vector<double> cholesky_solve(const Matrix& l, std::vector<double> b) {
  const std::size_t n = l.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= l[i][k] * b[k];
    b[i] /= l[i][i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) b[i] -= l[k][i] * b[k];
    b[i] /= l[i][i];
  }
  return b;
}

// Control points of the linear trajectory t * v01: P_i = greville_i * v01.
std::vector<double> greville(const SplineBasis& basis) {
  std::vector<double> g(basis.n_ctrl());
  const auto& knots = basis.knots();
  for (int i = 0; i < basis.n_ctrl(); ++i) {
    double sum = 0.0;
    for (int k = 1; k <= basis.degree(); ++k) sum += knots[i + k];
    g[i] = sum / basis.degree();
  }
  return g;
}

constexpr std::array<double, 4> kObservationTimes = {-1.0, 0.0, 1.0, 2.0};

}  // namespace

SplineTrajectory fit_trajectory(const MultiFrameSet& set, const FitOptions& options) {
  set.validate();
  if (!(options.anchor_weight > 0.0) || !(options.ridge >= 0.0)) {
    fail(ErrorKind::InvalidArgument, "fit options: anchor weight must be positive and ridge nonnegative");
  }
  SplineBasis basis(options.n_ctrl);
  const int n = basis.n_ctrl();
  const int rows = static_cast<int>(kObservationTimes.size());

  Matrix a(rows, std::vector<double>(n));
  for (int j = 0; j < rows; ++j) {
    a[j] = basis.eval(kObservationTimes[j]);
    if (kObservationTimes[j] == 0.0) {
      for (double& v : a[j]) v *= options.anchor_weight;
    }
  }
  Matrix normal(n, std::vector<double>(n, 0.0));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (int j = 0; j < rows; ++j) normal[r][c] += a[j][r] * a[j][c];
    }
    normal[r][r] += options.ridge;
  }

  SplineTrajectory trajectory(basis, set.i0.height(), set.i0.width());
  const int h = trajectory.height();
  const int w = trajectory.width();
  const std::vector<double> lin = greville(basis);

  auto linear_fallback = [&](int y, int x) {
    const Vec2 v = set.v0_to_1.at(y, x);
    for (int i = 0; i < n; ++i) trajectory.control(y, x, i) = v * lin[i];
    trajectory.flagged()[static_cast<std::size_t>(y) * w + x] = 1;
  };

  if (!cholesky(normal)) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) linear_fallback(y, x);
    return trajectory;
  }

  // Solution operator S = (A^T A + ridge I)^-1 A^T, shared by every pixel.
  Matrix solve(n, std::vector<double>(rows));
  for (int j = 0; j < rows; ++j) {
    std::vector<double> column(n);
    for (int r = 0; r < n; ++r) column[r] = a[j][r];
    const std::vector<double> s = cholesky_solve(normal, column);
    for (int r = 0; r < n; ++r) solve[r][j] = s[r];
  }

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // The t = 0 observation is zero displacement, so its column drops out.
      const std::array<Vec2, 4> obs = {set.v0_to_minus1.at(y, x), Vec2{}, set.v0_to_1.at(y, x), set.v0_to_2.at(y, x)};
      bool finite = true;
      for (int i = 0; i < n; ++i) {
        Vec2 p{};
        for (int j = 0; j < rows; ++j) p = p + obs[j] * solve[i][j];
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) finite = false;
        trajectory.control(y, x, i) = p;
      }
      if (!finite) linear_fallback(y, x);
    }
  }
  return trajectory;
}

FlowField eval_flow(const SplineTrajectory& trajectory, double t) {
  const std::vector<double> b = trajectory.basis().eval(t);
  const int n = trajectory.basis().n_ctrl();
  FlowField out(trajectory.height(), trajectory.width());
  for (int y = 0; y < trajectory.height(); ++y) {
    for (int x = 0; x < trajectory.width(); ++x) {
      Vec2 v{};
      for (int i = 0; i < n; ++i) v = v + trajectory.control(y, x, i) * b[i];
      out.at(y, x) = v;
    }
  }
  return out;
}

DistanceMap dense_distance_map(const SplineTrajectory& trajectory, double t, const FlowField& v01, double eps) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::Domain, "dense_distance_map: t must lie in [0, 1]");
  require_same_size(trajectory.size(), v01.size(), "dense_distance_map");
  return distance_map_from_flows(eval_flow(trajectory, t), v01, eps, true);
}

DistanceMap outer_distance_map(const SplineTrajectory& trajectory, double t, double eps) {
  const FlowField start = eval_flow(trajectory, trajectory.basis().t_begin());
  const FlowField end = eval_flow(trajectory, trajectory.basis().t_end());
  const FlowField now = eval_flow(trajectory, t);
  return distance_map_from_flows(now - start, end - start, eps, false);
}

DistanceMap remap_distance_to_outer(const DistanceMap& d) {
  DistanceMap out = d;
  for (double& v : out.data()) v = (std::clamp(v, 0.0, 1.0) + 1.0) / 3.0;
  return out;
}

namespace {

// Pixels between where the linear outer warp puts each I0 pixel,
// V(-1) + d' (V(2) - V(-1)) with d' clamped, and where its fitted path is
// at time t. Curved paths and motion that reverses inside the outer span
// both show up here.
std::vector<double> outer_warp_deviation(const SplineTrajectory& trajectory, const FlowField& v0t,
                                         const DistanceMap& d_prime) {
  const FlowField start = eval_flow(trajectory, trajectory.basis().t_begin());
  const FlowField end = eval_flow(trajectory, trajectory.basis().t_end());
  std::vector<double> out(start.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double raw = d_prime.data()[i];
    const double d = std::isfinite(raw) ? std::clamp(raw, 0.0, 1.0) : 0.5;
    const Vec2 landing = start.data()[i] + (end.data()[i] - start.data()[i]) * d;
    const Vec2 r = landing - v0t.data()[i];
    out[i] = std::sqrt(r.dot(r));
  }
  return out;
}

// Outer warps fade out linearly as their landing error grows.
double outer_trust(double deviation) { return std::clamp(1.0 - deviation / kOuterPathTolerance, 0.0, 1.0); }

// Colour agreement kernel on mean squared channel differences. An outer warp
// only adds to the inner estimate where the two agree; letting the two outer
// warps outvote the inner one fails where both leak the same static
// background through a moving object.
constexpr double kAgreementScale2 = 0.1 * 0.1;

double agreement(double mean_sq_diff) { return std::exp(-mean_sq_diff / kAgreementScale2); }

double mean_sq(const double* a, const double* b, int channels) {
  double s = 0.0;
  for (int c = 0; c < channels; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return s / channels;
}

// Forward splat in which each source pixel lands with mass scaled by its
// trust. Where only untrusted sources arrive the result is a hole.
SplatResult trusted_splat(const Frame& frame, const FlowField& flow, const DistanceMap& trust, double sharpness) {
  ImportanceMap importance = motion_importance(flow, sharpness);
  for (std::size_t i = 0; i < trust.data().size(); ++i) importance.data()[i] *= trust.data()[i];
  SplatResult out = forward_warp_splat(frame, flow, importance);
  const FieldSplat mass = splat_field(trust.data(), 1, flow, nullptr);
  for (std::size_t i = 0; i < mass.values.size(); ++i) out.weight.data()[i] *= mass.values[i];
  return out;
}

FlowField carry_flow(const FlowField& values, const FlowField& along, double splat_sharpness) {
  std::vector<double> raw(values.data().size() * 2);
  for (std::size_t i = 0; i < values.data().size(); ++i) {
    raw[i * 2] = values.data()[i].x;
    raw[i * 2 + 1] = values.data()[i].y;
  }
  const ImportanceMap importance = motion_importance(along, splat_sharpness);
  const FieldSplat moved = splat_field(raw, 2, along, &importance, 0.0);
  FlowField out(values.height(), values.width());
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = {moved.values[i * 2], moved.values[i * 2 + 1]};
  return out;
}

}  // namespace

OuterFlows derive_outer_flows(const MultiFrameSet& set, double splat_sharpness) {
  set.validate();
  const FlowField span = set.v0_to_2 - set.v0_to_minus1;
  return {carry_flow(span, set.v0_to_minus1, splat_sharpness), carry_flow(negate(span), set.v0_to_2, splat_sharpness)};
}

Frame blend_three(const Frame& outer_plus, const Frame& inner, const Frame& outer_minus, const ThreeWayMask& mask) {
  require_same_size(inner.size(), outer_plus.size(), "blend_three");
  require_same_size(inner.size(), outer_minus.size(), "blend_three");
  require_same_size(inner.size(), mask.m1.size(), "blend_three");
  require_same_size(inner.size(), mask.m2.size(), "blend_three");
  require_same_size(inner.size(), mask.m3.size(), "blend_three");
  const int channels = inner.channels();
  Frame out(inner.height(), inner.width(), channels);
  for (std::size_t i = 0; i < mask.m1.data().size(); ++i) {
    const double m1 = mask.m1.data()[i];
    const double m2 = mask.m2.data()[i];
    const double m3 = mask.m3.data()[i];
    for (int c = 0; c < channels; ++c) {
      const std::size_t k = i * channels + c;
      const double v = m1 * outer_plus.data()[k] + m2 * inner.data()[k] + m3 * outer_minus.data()[k];
      out.data()[k] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

RefineResult refine_multiframe(const MultiFrameSet& set, double t, const DistanceMap& d_prime, const Frame& i_t,
                               const std::optional<OuterFlows>& outer, const InterpConfig& config) {
  config.validate();
  set.validate();
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::Domain, "refine_multiframe: t must lie in [0, 1]");
  require_same_size(set.i0.size(), d_prime.size(), "refine_multiframe: distance map");
  require_same_size(set.i0.size(), i_t.size(), "refine_multiframe: inner estimate");
  if (i_t.channels() != set.i0.channels()) fail(ErrorKind::DimensionMismatch, "refine_multiframe: channel mismatch");

  const OuterFlows flows = outer ? *outer : derive_outer_flows(set, config.splat_sharpness);
  require_same_size(set.i0.size(), flows.v_minus1_to_2.size(), "refine_multiframe: V-1->2");
  require_same_size(set.i0.size(), flows.v_2_to_minus1.size(), "refine_multiframe: V2->-1");

  const double sharp = config.splat_sharpness;
  const SplineTrajectory trajectory = fit_trajectory(set);
  const FlowField v0t = eval_flow(trajectory, t);
  const DistanceMap dp = clamp01(d_prime);
  const std::vector<double> deviation = outer_warp_deviation(trajectory, v0t, d_prime);
  // An I0 pixel vouches for the outer warp only if its path lands right at
  // time t and its colour matches where the flow says it came from.
  DistanceMap trust_minus1(set.i0.height(), set.i0.width());
  DistanceMap trust_2(set.i0.height(), set.i0.width());
  const Frame back_minus1 = backward_warp(set.i_minus1, set.v0_to_minus1);
  const Frame back_2 = backward_warp(set.i2, set.v0_to_2);
  const int channels = i_t.channels();
  for (std::size_t i = 0; i < deviation.size(); ++i) {
    const double path = outer_trust(deviation[i]);
    const double* here = set.i0.data().data() + i * channels;
    trust_minus1.data()[i] = path * agreement(mean_sq(here, back_minus1.data().data() + i * channels, channels));
    trust_2.data()[i] = path * agreement(mean_sq(here, back_2.data().data() + i * channels, channels));
  }

  // d' and trust live on I0's grid; the warps need them on the I-1 and I2
  // grids and the mask on the grid of time t.
  const DistanceMap dp_start = transport_map(dp, set.v0_to_minus1, sharp);
  const DistanceMap dp_end = transport_map(dp, set.v0_to_2, sharp);
  const DistanceMap dp_at_t = transport_map(dp, v0t, sharp);
  const DistanceMap trust_start = transport_map(trust_minus1, set.v0_to_minus1, sharp);
  const DistanceMap trust_end = transport_map(trust_2, set.v0_to_2, sharp);
  const DistanceMap trust1_at_t = transport_map(trust_minus1, v0t, sharp);
  const DistanceMap trust3_at_t = transport_map(trust_2, v0t, sharp);

  FlowField f_plus(flows.v_minus1_to_2.height(), flows.v_minus1_to_2.width());
  FlowField f_minus(flows.v_2_to_minus1.height(), flows.v_2_to_minus1.width());
  for (std::size_t i = 0; i < f_plus.data().size(); ++i) {
    f_plus.data()[i] = flows.v_minus1_to_2.data()[i] * dp_start.data()[i];
    f_minus.data()[i] = flows.v_2_to_minus1.data()[i] * (1.0 - dp_end.data()[i]);
  }
  const SplatResult plus = trusted_splat(set.i_minus1, f_plus, trust_start, sharp);
  const SplatResult minus = trusted_splat(set.i2, f_minus, trust_end, sharp);

  const int h = set.i0.height();
  const int w = set.i0.width();
  ThreeWayMask mask{MaskImage(h, w), MaskImage(h, w), MaskImage(h, w)};
  for (std::size_t i = 0; i < dp.data().size(); ++i) {
    const double d = dp_at_t.data()[i];
    const double* p = plus.frame.data().data() + i * channels;
    const double* q = i_t.data().data() + i * channels;
    const double* m = minus.frame.data().data() + i * channels;
    const double w1 = std::min(plus.weight.data()[i], 1.0) * trust1_at_t.data()[i];
    const double w3 = std::min(minus.weight.data()[i], 1.0) * trust3_at_t.data()[i];
    const double a1 = w1 * (1.0 - d) * agreement(mean_sq(p, q, channels));
    const double a3 = w3 * d * agreement(mean_sq(m, q, channels));
    const double sum = a1 + kInnerBaselineWeight + a3;
    mask.m1.data()[i] = a1 / sum;
    mask.m2.data()[i] = kInnerBaselineWeight / sum;
    mask.m3.data()[i] = a3 / sum;
  }
  Frame refined = blend_three(plus.frame, i_t, minus.frame, mask);
  return {std::move(refined), std::move(mask)};
}

}  // namespace distix::spline
