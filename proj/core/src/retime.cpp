#include "distix/retime.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "distix/iterative.hpp"
#include "json.hpp"

namespace distix::retime {

using nlohmann::json;

namespace {

std::string point_label(std::size_t i, const CurvePoint& p) {
  std::ostringstream out;
  out << "point " << i << " (t=" << p.t << ", d=" << p.d << ")";
  return out.str();
}

double cubic(double a, double b, double c, double d, double u) {
  const double v = 1.0 - u;
  return v * v * v * a + 3.0 * v * v * u * b + 3.0 * v * u * u * c + u * u * u * d;
}

}  // namespace

const char* to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::Linear: return "linear";
    case CurveKind::PiecewiseLinear: return "piecewise_linear";
    case CurveKind::CubicBezier: return "cubic_bezier";
  }
  return "?";
}

CurveKind parse_curve_kind(const std::string& name) {
  for (CurveKind k : {CurveKind::Linear, CurveKind::PiecewiseLinear, CurveKind::CubicBezier}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::InvalidArgument, "unknown curve kind '" + name + "'");
}

void DistanceCurve::validate() const {
  const std::size_t n = points.size();
  if (kind == CurveKind::Linear && n != 2) {
    fail(ErrorKind::InvalidArgument, "linear curve needs exactly 2 points, got " + std::to_string(n));
  }
  if (kind == CurveKind::PiecewiseLinear && n < 2) {
    fail(ErrorKind::InvalidArgument, "piecewise_linear curve needs at least 2 points");
  }
  if (kind == CurveKind::CubicBezier && (n < 4 || (n - 1) % 3 != 0)) {
    fail(ErrorKind::InvalidArgument, "cubic_bezier curve needs 3k+1 points, got " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const CurvePoint& p = points[i];
    if (!std::isfinite(p.t) || !std::isfinite(p.d)) fail(ErrorKind::InvalidArgument, point_label(i, p) + " is not finite");
    if (p.d < 0.0 || p.d > 1.0) fail(ErrorKind::InvalidArgument, point_label(i, p) + ": d outside [0, 1]");
    if (i > 0 && !(p.t > points[i - 1].t)) {
      fail(ErrorKind::InvalidArgument, point_label(i, p) + ": t not strictly increasing");
    }
  }
  if (points.front().t != 0.0) fail(ErrorKind::InvalidArgument, point_label(0, points.front()) + ": first t must be 0");
  if (points.back().t != 1.0) fail(ErrorKind::InvalidArgument, point_label(n - 1, points.back()) + ": last t must be 1");
}

double DistanceCurve::eval(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::Domain, "curve evaluated outside [0, 1]");
  switch (kind) {
    case CurveKind::Linear: return points[0].d + (points[1].d - points[0].d) * t;
    case CurveKind::PiecewiseLinear: {
      auto hi = std::upper_bound(points.begin(), points.end(), t,
                                 [](double v, const CurvePoint& p) { return v < p.t; });
      if (hi == points.end()) return points.back().d;
      const CurvePoint& b = *hi;
      const CurvePoint& a = *(hi - 1);
      return a.d + (b.d - a.d) * (t - a.t) / (b.t - a.t);
    }
    case CurveKind::CubicBezier: {
      std::size_t seg = 0;
      while (seg + 3 < points.size() - 1 && t > points[seg + 3].t) seg += 3;
      const CurvePoint* p = &points[seg];
      if (t == p[0].t) return p[0].d;
      if (t == p[3].t) return p[3].d;
      // t(u) is monotone because the control t values are increasing.
      double lo = 0.0, hi = 1.0, u = 0.5;
      for (int it = 0; it < 100; ++it) {
        u = 0.5 * (lo + hi);
        const double tu = cubic(p[0].t, p[1].t, p[2].t, p[3].t, u);
        if (std::abs(tu - t) <= kBezierTolerance) break;
        (tu < t ? lo : hi) = u;
      }
      return std::clamp(cubic(p[0].d, p[1].d, p[2].d, p[3].d, u), 0.0, 1.0);
    }
  }
  return t;
}

double eval_curve(const DistanceCurve& curve, double t) { return curve.eval(t); }

const char* to_string(OverlapRule rule) { return rule == OverlapRule::LastWins ? "last_wins" : "priority"; }

OverlapRule parse_overlap_rule(const std::string& name) {
  if (name == "last_wins") return OverlapRule::LastWins;
  if (name == "priority") return OverlapRule::Priority;
  fail(ErrorKind::InvalidArgument, "unknown overlap rule '" + name + "' (last_wins|priority)");
}

void RetimeScript::validate(Size canvas) const {
  background.validate();
  if (!(feather >= 0.0) || !std::isfinite(feather)) fail(ErrorKind::InvalidArgument, "feather must be >= 0");
  for (const Layer& layer : layers) {
    try {
      layer.curve.validate();
    } catch (const Error& e) {
      fail(e.kind(), "layer '" + layer.name + "': " + e.what());
    }
    require_same_size(layer.mask.size(), canvas, ("mask '" + layer.name + "'").c_str());
  }
}

MaskImage binarize_mask(const Frame& frame) {
  MaskImage out(frame.height(), frame.width());
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) out.at(y, x) = frame.luma(y, x) >= 0.5 ? 1.0 : 0.0;
  return out;
}

MaskImage binarize_mask(const MaskImage& mask) {
  MaskImage out = mask;
  for (double& v : out.data()) v = v >= 0.5 ? 1.0 : 0.0;
  return out;
}

namespace {

// Alpha of a binary mask with a linear ramp of `width` px inside its border:
// distance to the nearest outside pixel divided by width, capped at 1.
// Pixels outside the mask stay exactly 0.
MaskImage feathered(const MaskImage& mask, double width) {
  MaskImage alpha = binarize_mask(mask);
  if (width <= 0.0) return alpha;
  const int h = mask.height();
  const int w = mask.width();
  const int r = static_cast<int>(std::ceil(width));
  MaskImage out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (alpha.at(y, x) == 0.0) continue;
      double nearest = width;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = y + dy;
          const int xx = x + dx;
          // The canvas border does not count as outside.
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || alpha.at(yy, xx) != 0.0) continue;
          nearest = std::min(nearest, std::sqrt(static_cast<double>(dx * dx + dy * dy)));
        }
      out.at(y, x) = std::min(1.0, nearest / width);
    }
  return out;
}

}  // namespace

DistanceMap compose_maps(const RetimeScript& script, double t, int height, int width) {
  script.validate({height, width});
  DistanceMap out = uniform_map(script.background.eval(t), height, width);

  std::vector<const Layer*> order;
  for (const Layer& layer : script.layers) order.push_back(&layer);
  if (script.overlap == OverlapRule::Priority) {
    std::stable_sort(order.begin(), order.end(), [](const Layer* a, const Layer* b) { return a->priority < b->priority; });
  }
  for (const Layer* layer : order) {
    const double d = layer->curve.eval(t);
    const MaskImage alpha = feathered(layer->mask, script.feather);
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      const double a = alpha.data()[i];
      if (a == 1.0) {
        out.data()[i] = d;
      } else if (a > 0.0) {
        out.data()[i] = std::clamp((1.0 - a) * out.data()[i] + a * d, 0.0, 1.0);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void schema_error(const std::string& what) { fail(ErrorKind::Format, "script: " + what); }

DistanceCurve parse_curve(const json& j, const std::string& where) {
  if (!j.is_object()) schema_error(where + " curve must be an object");
  DistanceCurve curve;
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) schema_error(where + " curve kind must be a string");
    try {
      curve.kind = parse_curve_kind(j["kind"].get<std::string>());
    } catch (const Error& e) {
      schema_error(where + ": " + e.what());
    }
  }
  if (!j.contains("points") || !j["points"].is_array()) schema_error(where + " curve needs a points array");
  curve.points.clear();
  for (const json& p : j["points"]) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      schema_error(where + " curve points must be [t, d] pairs");
    }
    curve.points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  try {
    curve.validate();
  } catch (const Error& e) {
    fail(ErrorKind::InvalidArgument, where + ": " + e.what());
  }
  return curve;
}

}  // namespace

RetimeScript parse_script(const std::string& json_text, const MaskResolver& resolve) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    schema_error(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) schema_error("top level must be an object");

  RetimeScript script;
  if (root.contains("background")) script.background = parse_curve(root["background"], "background");
  if (root.contains("overlap")) {
    if (!root["overlap"].is_string()) schema_error("overlap must be a string");
    try {
      script.overlap = parse_overlap_rule(root["overlap"].get<std::string>());
    } catch (const Error& e) {
      schema_error(e.what());
    }
  }
  if (root.contains("feather")) {
    const json& f = root["feather"];
    if (f.is_boolean()) {
      script.feather = f.get<bool>() ? kDefaultFeather : 0.0;
    } else if (f.is_number() && f.get<double>() >= 0.0) {
      script.feather = f.get<double>();
    } else {
      schema_error("feather must be a boolean or a non-negative number");
    }
  }
  if (root.contains("layers")) {
    if (!root["layers"].is_array()) schema_error("layers must be an array");
    std::size_t index = 0;
    for (const json& l : root["layers"]) {
      const std::string where = "layer " + std::to_string(index++);
      if (!l.is_object() || !l.contains("mask") || !l["mask"].is_string()) {
        schema_error(where + " needs a mask name");
      }
      if (!l.contains("curve")) schema_error(where + " needs a curve");
      Layer layer;
      layer.name = l["mask"].get<std::string>();
      layer.curve = parse_curve(l["curve"], where + " ('" + layer.name + "')");
      if (l.contains("priority")) {
        if (!l["priority"].is_number_integer()) schema_error(where + " priority must be an integer");
        layer.priority = l["priority"].get<int>();
      }
      std::optional<MaskImage> mask = resolve(layer.name);
      if (!mask) fail(ErrorKind::Io, "mask '" + layer.name + "' not found");
      layer.mask = binarize_mask(*mask);
      script.layers.push_back(std::move(layer));
    }
  }
  return script;
}

std::string curve_to_json(const DistanceCurve& curve) {
  json j;
  j["kind"] = to_string(curve.kind);
  j["points"] = json::array();
  for (const CurvePoint& p : curve.points) j["points"].push_back({p.t, p.d});
  return j.dump();
}

std::string validation_report(const RetimeScript& script) {
  auto summarize = [](const DistanceCurve& c) {
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double d = c.eval(i / 100.0);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    json j;
    j["kind"] = to_string(c.kind);
    j["t_domain"] = {c.points.front().t, c.points.back().t};
    j["d_range"] = {lo, hi};
    j["points"] = c.points.size();
    return j;
  };
  json report;
  report["valid"] = true;
  report["overlap"] = to_string(script.overlap);
  report["feather"] = script.feather;
  report["background"] = summarize(script.background);
  report["layers"] = json::array();
  for (const Layer& l : script.layers) {
    json j = summarize(l.curve);
    j["mask"] = l.name;
    j["priority"] = l.priority;
    report["layers"].push_back(j);
  }
  return report.dump();
}

Frame render_at(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10,
                const RetimeScript& script, double t, int iters, const InterpConfig& config) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "timestep outside [0, 1]");
  if (iters < 1) fail(ErrorKind::InvalidArgument, "iteration count must be at least 1");
  const DistanceMap map = compose_maps(script, t, i0.height(), i0.width());
  if (iters == 1) return interpolate(i0, i1, v01, v10, map, config);
  return iterative_interpolate(i0, i1, v01, v10, map, iters, config);
}

std::vector<Frame> render_retimed(const RenderJob& job) {
  for (double t : job.timesteps) {
    if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "timestep outside [0, 1]");
  }
  job.script.validate(job.i0.size());
  std::vector<Frame> out(job.timesteps.size());
  const int workers = std::clamp(job.threads, 1, std::max(1, static_cast<int>(out.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = render_at(job.i0, job.i1, job.v01, job.v10, job.script, job.timesteps[k], job.iters, job.config);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = next++; k < out.size(); k = next++) {
          out[k] = render_at(job.i0, job.i1, job.v01, job.v10, job.script, job.timesteps[k], job.iters, job.config);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace distix::retime
