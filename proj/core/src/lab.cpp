#include "distix/lab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

namespace distix::lab {

namespace {

constexpr int kSubsamples = 4;

// Portable uniform double in [0, 1) from the 53 high bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool covers(const Shape& shape, Vec2 c, double px, double py) {
  const double r = shape.size / 2.0;
  if (shape.kind == ShapeKind::Disk) {
    const double dx = px - c.x;
    const double dy = py - c.y;
    return dx * dx + dy * dy <= r * r;
  }
  return std::abs(px - c.x) <= r && std::abs(py - c.y) <= r;
}

double coverage(const Shape& shape, Vec2 c, int y, int x) {
  const double r = shape.size / 2.0 + 1.0;
  if (std::abs(x - c.x) > r || std::abs(y - c.y) > r) return 0.0;
  int hits = 0;
  for (int j = 0; j < kSubsamples; ++j)
    for (int i = 0; i < kSubsamples; ++i) {
      const double px = x + (i + 0.5) / kSubsamples - 0.5;
      const double py = y + (j + 0.5) / kSubsamples - 0.5;
      hits += covers(shape, c, px, py) ? 1 : 0;
    }
  return static_cast<double>(hits) / (kSubsamples * kSubsamples);
}

void check_inside(const SceneSpec& spec, const Shape& shape, double t, std::size_t index) {
  const Vec2 c = shape.center(t);
  const double r = shape.size / 2.0;
  if (c.x - r < -0.5 || c.y - r < -0.5 || c.x + r > spec.canvas.width - 0.5 || c.y + r > spec.canvas.height - 0.5) {
    std::ostringstream msg;
    msg << "shape " << index << " leaves the canvas at t=" << t;
    fail(ErrorKind::InvalidArgument, msg.str());
  }
}

// Index of the top-most shape covering (y, x) at time t, or -1.
int top_shape(const SceneSpec& spec, double t, int y, int x) {
  for (int k = static_cast<int>(spec.shapes.size()) - 1; k >= 0; --k) {
    if (coverage(spec.shapes[k], spec.shapes[k].center(t), y, x) > 0.0) return k;
  }
  return -1;
}

}  // namespace

const char* to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::Constant: return "constant";
    case ProfileKind::Accelerate: return "accelerate";
    case ProfileKind::Decelerate: return "decelerate";
    case ProfileKind::Curved: return "curved";
  }
  return "?";
}

ProfileKind parse_profile_kind(const std::string& name) {
  for (ProfileKind k : {ProfileKind::Constant, ProfileKind::Accelerate, ProfileKind::Decelerate, ProfileKind::Curved}) {
    if (name == to_string(k)) return k;
  }
  fail(ErrorKind::InvalidArgument, "unknown velocity profile '" + name + "'");
}

double VelocityProfile::s(double t) const {
  switch (kind) {
    case ProfileKind::Accelerate: return (1.0 - amount) * t + amount * t * t;
    case ProfileKind::Decelerate: return (1.0 + amount) * t - amount * t * t;
    case ProfileKind::Constant:
    case ProfileKind::Curved: return t;
  }
  return t;
}

double VelocityProfile::lateral(double t) const {
  return kind == ProfileKind::Curved ? curvature * 4.0 * t * (1.0 - t) : 0.0;
}

Vec2 Shape::center(double t) const {
  const Vec2 path = end - start;
  const Vec2 perp{-path.y, path.x};  // same length as path
  return start + path * profile.s(t) + perp * profile.lateral(t);
}

void SceneSpec::validate() const {
  if (canvas.height <= 0 || canvas.width <= 0) fail(ErrorKind::InvalidArgument, "scene canvas must be positive");
  if (channels != 1 && channels != 3) fail(ErrorKind::InvalidArgument, "scene channels must be 1 or 3");
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    if (!(shapes[k].size > 0.0)) fail(ErrorKind::InvalidArgument, "shape size must be positive");
    for (int i = 0; i <= 32; ++i) check_inside(*this, shapes[k], i / 32.0, k);
  }
}

Frame rasterize(const SceneSpec& spec, double t) {
  if (!std::isfinite(t)) fail(ErrorKind::InvalidArgument, "rasterize: t must be finite");
  for (std::size_t k = 0; k < spec.shapes.size(); ++k) check_inside(spec, spec.shapes[k], t, k);
  Frame out(spec.canvas.height, spec.canvas.width, spec.channels);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      Color c = spec.background;
      for (const Shape& shape : spec.shapes) {
        const double a = coverage(shape, shape.center(t), y, x);
        for (int ch = 0; ch < 3; ++ch) c[ch] = (1.0 - a) * c[ch] + a * shape.color[ch];
      }
      for (int ch = 0; ch < spec.channels; ++ch) out.at(y, x, ch) = std::clamp(c[ch], 0.0, 1.0);
    }
  return out;
}

FlowField anchored_flow(const SceneSpec& spec, double from, double to) {
  FlowField flow(spec.canvas.height, spec.canvas.width);
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x) {
      const int k = top_shape(spec, from, y, x);
      if (k >= 0) flow.at(y, x) = spec.shapes[k].center(to) - spec.shapes[k].center(from);
    }
  return flow;
}

RenderedScene render_scene(const SceneSpec& spec, double t) {
  if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "render_scene: t must lie in [0, 1]");
  spec.validate();
  RenderedScene out;
  out.frame = rasterize(spec, t);
  out.v0t = anchored_flow(spec, 0.0, t);
  out.d_true = distance_map_from_flows(out.v0t, anchored_flow(spec, 0.0, 1.0));
  return out;
}

std::vector<TripletSample> make_dataset(const SceneSpec& base, int n_profiles, const std::vector<double>& timesteps,
                                        std::uint64_t seed, int threads) {
  if (n_profiles < 1) fail(ErrorKind::InvalidArgument, "make_dataset: need at least one profile");
  if (timesteps.empty()) fail(ErrorKind::InvalidArgument, "make_dataset: no timesteps");
  for (double t : timesteps) {
    if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::InvalidArgument, "make_dataset: timesteps must lie in [0, 1]");
  }
  base.validate();

  std::vector<VelocityProfile> profiles;
  if (n_profiles == 1) {
    profiles.push_back(VelocityProfile::constant());
  } else {
    profiles.push_back(VelocityProfile::accelerate());
    profiles.push_back(VelocityProfile::decelerate());
    std::mt19937_64 rng(seed);
    while (static_cast<int>(profiles.size()) < n_profiles) {
      const bool accel = uniform01(rng) < 0.5;
      const double a = 0.2 + 0.8 * uniform01(rng);
      profiles.push_back(accel ? VelocityProfile::accelerate(a) : VelocityProfile::decelerate(a));
    }
  }

  const Frame i0 = rasterize(base, 0.0);
  const Frame i1 = rasterize(base, 1.0);
  const FlowField v01 = anchored_flow(base, 0.0, 1.0);

  std::vector<TripletSample> out(profiles.size() * timesteps.size());
  auto build = [&](std::size_t idx) {
    SceneSpec spec = base;
    const VelocityProfile& profile = profiles[idx / timesteps.size()];
    for (Shape& s : spec.shapes) s.profile = profile;
    const double t = timesteps[idx % timesteps.size()];
    RenderedScene r = render_scene(spec, t);
    out[idx] = TripletSample{i0, i1, std::move(r.frame), t, std::move(r.d_true), v01, std::move(r.v0t), profile};
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(out.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < out.size(); ++i) build(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < out.size(); i += workers) build(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

SceneSpec default_scene() {
  SceneSpec spec;
  spec.canvas = {5, 10};
  Shape square;
  square.kind = ShapeKind::Square;
  square.size = 3.0;
  square.start = {2.5, 2.0};
  square.end = {6.5, 2.0};
  square.color = {0.9, 0.9, 0.9};
  spec.shapes.push_back(square);
  return spec;
}

Vec2 object_centroid(const Frame& frame, double background, int x0, int y0, int x1, int y1, double threshold) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, frame.width());
  y1 = std::min(y1, frame.height());
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double w = std::abs(frame.luma(y, x) - background);
      if (w <= threshold) continue;
      sw += w;
      sx += w * x;
      sy += w * y;
    }
  if (sw <= 0.0) fail(ErrorKind::Domain, "object_centroid: no object pixels in region");
  return {sx / sw, sy / sw};
}

// ---------------------------------------------------------------------------

const char* to_string(Indexing indexing) { return indexing == Indexing::Time ? "time" : "distance"; }

Indexing parse_indexing(const std::string& name) {
  if (name == "time") return Indexing::Time;
  if (name == "distance") return Indexing::Distance;
  fail(ErrorKind::InvalidArgument, "unknown indexing '" + name + "' (time|distance)");
}

TinyModel::TinyModel(int input_dim, int hidden, std::uint64_t seed, bool linear)
    : input_dim_(input_dim), hidden_(hidden), linear_(linear) {
  if (input_dim < 1 || hidden < 1) fail(ErrorKind::InvalidArgument, "TinyModel: dimensions must be positive");
  std::mt19937_64 rng(seed);
  params_.resize(static_cast<std::size_t>(hidden) * input_dim + 2 * hidden + 1, 0.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::size_t n_w1 = static_cast<std::size_t>(hidden) * input_dim;
  for (std::size_t i = 0; i < n_w1; ++i) params_[i] = (2.0 * uniform01(rng) - 1.0) * s1;
  for (int j = 0; j < hidden; ++j) params_[n_w1 + hidden + j] = (2.0 * uniform01(rng) - 1.0) * s2;
}

double TinyModel::predict(const double* x) const {
  const std::size_t n_w1 = static_cast<std::size_t>(hidden_) * input_dim_;
  const double* w1 = params_.data();
  const double* b1 = w1 + n_w1;
  const double* w2 = b1 + hidden_;
  double y = w2[hidden_];
  for (int j = 0; j < hidden_; ++j) {
    double z = b1[j];
    const double* row = w1 + static_cast<std::size_t>(j) * input_dim_;
    for (int i = 0; i < input_dim_; ++i) z += row[i] * x[i];
    y += w2[j] * (linear_ ? z : std::tanh(z));
  }
  return y;
}

void Batch::add(const std::vector<double>& features, double target, double multiplicity) {
  if (input_dim == 0) input_dim = static_cast<int>(features.size());
  if (static_cast<int>(features.size()) != input_dim) fail(ErrorKind::DimensionMismatch, "batch: feature length");
  x.insert(x.end(), features.begin(), features.end());
  y.push_back(target);
  count.push_back(multiplicity);
}

Batch Batch::merged() const {
  std::map<std::vector<double>, std::size_t> seen;
  Batch out;
  out.input_dim = input_dim;
  for (std::size_t r = 0; r < rows(); ++r) {
    std::vector<double> key(x.begin() + static_cast<std::ptrdiff_t>(r * input_dim),
                            x.begin() + static_cast<std::ptrdiff_t>((r + 1) * input_dim));
    key.push_back(y[r]);
    auto [it, inserted] = seen.emplace(std::move(key), out.rows());
    if (inserted) {
      out.x.insert(out.x.end(), x.begin() + static_cast<std::ptrdiff_t>(r * input_dim),
                   x.begin() + static_cast<std::ptrdiff_t>((r + 1) * input_dim));
      out.y.push_back(y[r]);
      out.count.push_back(count[r]);
    } else {
      out.count[it->second] += count[r];
    }
  }
  return out;
}

namespace {

void require_batch(const TinyModel& model, const Batch& batch) {
  if (batch.rows() == 0) fail(ErrorKind::InvalidArgument, "empty training batch");
  if (batch.input_dim != model.input_dim()) fail(ErrorKind::DimensionMismatch, "batch width differs from model input");
}

}  // namespace

double loss(const TinyModel& model, const Batch& batch) {
  require_batch(model, batch);
  double sum = 0.0, total = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const double e = model.predict(batch.x.data() + r * batch.input_dim) - batch.y[r];
    sum += batch.count[r] * e * e;
    total += batch.count[r];
  }
  return sum / total;
}

double loss_and_gradient(const TinyModel& model, const Batch& batch, std::vector<double>& grad) {
  require_batch(model, batch);
  const int d = model.input_dim();
  const int h = model.hidden();
  const std::size_t n_w1 = static_cast<std::size_t>(h) * d;
  const double* w1 = model.params().data();
  const double* b1 = w1 + n_w1;
  const double* w2 = b1 + h;
  grad.assign(model.params().size(), 0.0);
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + n_w1;
  double* g_w2 = g_b1 + h;

  double total = 0.0;
  for (double c : batch.count) total += c;

  std::vector<double> act(h), dz(h);
  double sum = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const double* x = batch.x.data() + r * d;
    double y = w2[h];
    for (int j = 0; j < h; ++j) {
      double z = b1[j];
      const double* row = w1 + static_cast<std::size_t>(j) * d;
      for (int i = 0; i < d; ++i) z += row[i] * x[i];
      act[j] = model.linear() ? z : std::tanh(z);
      y += w2[j] * act[j];
    }
    const double e = y - batch.y[r];
    sum += batch.count[r] * e * e;
    const double g = 2.0 * batch.count[r] * e / total;
    g_w2[h] += g;
    for (int j = 0; j < h; ++j) {
      g_w2[j] += g * act[j];
      dz[j] = g * w2[j] * (model.linear() ? 1.0 : 1.0 - act[j] * act[j]);
      g_b1[j] += dz[j];
      double* grow = g_w1 + static_cast<std::size_t>(j) * d;
      for (int i = 0; i < d; ++i) grow[i] += dz[j] * x[i];
    }
  }
  return sum / total;
}

std::vector<double> train(TinyModel& model, const Batch& batch, const TrainOptions& options) {
  if (options.epochs < 0) fail(ErrorKind::InvalidArgument, "train: epochs must be non-negative");
  if (!(options.lr > 0.0)) fail(ErrorKind::InvalidArgument, "train: learning rate must be positive");
  if (!(options.momentum >= 0.0 && options.momentum < 1.0)) {
    fail(ErrorKind::InvalidArgument, "train: momentum must lie in [0, 1)");
  }
  require_batch(model, batch);
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(options.epochs));
  std::vector<double> grad;
  std::vector<double> velocity(model.params().size(), 0.0);
  for (int e = 0; e < options.epochs; ++e) {
    const double l = loss_and_gradient(model, batch, grad);
    if (!std::isfinite(l)) fail(ErrorKind::Divergence, "training diverged at epoch " + std::to_string(e));
    curve.push_back(l);
    auto& p = model.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
      velocity[i] = options.momentum * velocity[i] - options.lr * grad[i];
      p[i] += velocity[i];
    }
  }
  return curve;
}

double gradient_check(const TinyModel& model, const Batch& batch, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "gradient_check: eps must be positive");
  std::vector<double> analytic;
  loss_and_gradient(model, batch, analytic);
  TinyModel probe = model;
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double keep = probe.params()[i];
    probe.params()[i] = keep + eps;
    const double up = loss(probe, batch);
    probe.params()[i] = keep - eps;
    const double down = loss(probe, batch);
    probe.params()[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

std::vector<double> pixel_features(const Frame& i0, const Frame& i1, int y, int x, double index) {
  std::vector<double> f;
  f.reserve(2 * kPatch * kPatch + 1);
  const int r = kPatch / 2;
  for (const Frame* frame : {&i0, &i1}) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int yy = std::clamp(y + dy, 0, frame->height() - 1);
        const int xx = std::clamp(x + dx, 0, frame->width() - 1);
        f.push_back(2.0 * frame->luma(yy, xx) - 1.0);
      }
  }
  f.push_back(2.0 * index - 1.0);
  return f;
}

DistanceMap index_plane(const TripletSample& sample, Indexing indexing) {
  const int h = sample.i0.height();
  const int w = sample.i0.width();
  if (indexing == Indexing::Time) return uniform_map(sample.t, h, w);
  DistanceMap out = sample.d_true;
  double sum = 0.0;
  std::size_t moving = 0;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    if (sample.v01.data()[i].norm2() >= kDefaultFlowEps * kDefaultFlowEps) {
      sum += sample.d_true.data()[i];
      ++moving;
    }
  }
  const double fallback = moving > 0 ? sum / static_cast<double>(moving) : sample.t;
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    if (sample.v01.data()[i].norm2() < kDefaultFlowEps * kDefaultFlowEps) out.data()[i] = fallback;
  }
  return out;
}

Batch build_batch(const std::vector<TripletSample>& data, Indexing indexing) {
  if (data.empty()) fail(ErrorKind::InvalidArgument, "build_batch: empty dataset");
  Batch batch;
  for (const TripletSample& s : data) {
    const DistanceMap index = index_plane(s, indexing);
    for (int y = 0; y < s.it.height(); ++y)
      for (int x = 0; x < s.it.width(); ++x) batch.add(pixel_features(s.i0, s.i1, y, x, index.at(y, x)), s.it.luma(y, x));
  }
  return batch.merged();
}

TinyModel make_model(std::uint64_t seed, bool linear) {
  return TinyModel(2 * kPatch * kPatch + 1, kHidden, seed, linear);
}

double train_scalar_toy(const std::vector<double>& targets, std::uint64_t seed, const TrainOptions& options) {
  if (targets.empty()) fail(ErrorKind::InvalidArgument, "train_scalar_toy: no targets");
  TinyModel model(1, kHidden, seed);
  Batch batch;
  for (double t : targets) batch.add({1.0}, t);
  train(model, batch, options);
  const double one = 1.0;
  return model.predict(&one);
}

std::string ModeAverageReport::to_csv() const {
  std::ostringstream out;
  out.precision(9);
  out << "sample,y,x,t,target,mean_target,time_output,distance_output\n";
  for (const ConflictRow& r : rows) {
    out << r.sample << ',' << r.y << ',' << r.x << ',' << r.t << ',' << r.target << ',' << r.mean_target << ','
        << r.time_output << ',' << r.distance_output << '\n';
  }
  return out.str();
}

ModeAverageReport mode_average_report(const std::vector<TripletSample>& data, const TinyModel& model_time,
                                      const TinyModel& model_dist, double spread) {
  if (data.empty()) fail(ErrorKind::InvalidArgument, "mode_average_report: empty dataset");

  // Rows sharing the exact time-indexed input vector form one group: the
  // best a time-indexed regressor can do there is the group's mean target.
  struct Group {
    std::vector<ConflictRow> rows;
    double lo = 1e300;
    double hi = -1e300;
    double sum = 0.0;
  };
  std::map<std::vector<double>, Group> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TripletSample& s = data[i];
    const DistanceMap dist = index_plane(s, Indexing::Distance);
    for (int y = 0; y < s.it.height(); ++y)
      for (int x = 0; x < s.it.width(); ++x) {
        const auto ft = pixel_features(s.i0, s.i1, y, x, s.t);
        const auto fd = pixel_features(s.i0, s.i1, y, x, dist.at(y, x));
        const double target = s.it.luma(y, x);
        Group& g = groups[ft];
        g.rows.push_back({static_cast<int>(i), y, x, s.t, target, 0.0, model_time.predict(ft.data()),
                          model_dist.predict(fd.data())});
        g.lo = std::min(g.lo, target);
        g.hi = std::max(g.hi, target);
        g.sum += target;
      }
  }

  ModeAverageReport report;
  std::vector<ConflictRow> all;
  for (auto& [key, g] : groups) {
    const double mean = g.sum / static_cast<double>(g.rows.size());
    const bool conflict = g.hi - g.lo > spread;
    if (conflict) report.conflicting_pixels += g.rows.size();
    for (ConflictRow& r : g.rows) {
      r.mean_target = mean;
      (conflict ? report.rows : all).push_back(r);
    }
  }
  const bool any = !report.rows.empty();
  const std::vector<ConflictRow>& used = any ? report.rows : all;
  double dev = 0.0, err = 0.0;
  for (const ConflictRow& r : used) {
    dev += std::abs(r.time_output - r.mean_target);
    err += std::abs(r.distance_output - r.target);
  }
  report.time_mean_deviation = dev / static_cast<double>(used.size());
  report.distance_mean_error = err / static_cast<double>(used.size());
  if (!any) report.rows = std::move(all);
  auto order = [](const ConflictRow& a, const ConflictRow& b) {
    return std::tie(a.sample, a.y, a.x) < std::tie(b.sample, b.y, b.x);
  };
  std::sort(report.rows.begin(), report.rows.end(), order);
  return report;
}

}  // namespace distix::lab
