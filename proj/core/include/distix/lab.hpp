#pragma once

// Synthetic scenes with controlled velocity profiles, and a tiny per-pixel
// regressor used to show how time indexing averages conflicting targets
// while distance indexing resolves them.

#include <cstdint>
#include <string>
#include <vector>

#include "distix/indexing.hpp"

namespace distix::lab {

enum class ProfileKind { Constant, Accelerate, Decelerate, Curved };

const char* to_string(ProfileKind kind);
ProfileKind parse_profile_kind(const std::string& name);

// Position along a straight path as a fraction s(t), plus an optional
// perpendicular bump for curved paths. s(0) = 0 and s(1) = 1 exactly.
struct VelocityProfile {
  ProfileKind kind = ProfileKind::Constant;
  // Accelerate: s = (1-a) t + a t^2. Decelerate: s = (1+a) t - a t^2.
  // Both monotone for a in [0, 1].
  double amount = 1.0;
  // Curved: lateral offset c * 4 t (1 - t) times the path length.
  double curvature = 0.0;

  double s(double t) const;
  double lateral(double t) const;

  static VelocityProfile constant() { return {}; }
  static VelocityProfile accelerate(double a = 1.0) { return {ProfileKind::Accelerate, a, 0.0}; }
  static VelocityProfile decelerate(double a = 1.0) { return {ProfileKind::Decelerate, a, 0.0}; }
  static VelocityProfile curved(double c) { return {ProfileKind::Curved, 0.0, c}; }
};

enum class ShapeKind { Disk, Square };

struct Shape {
  ShapeKind kind = ShapeKind::Disk;
  double size = 6.0;  // diameter or side, px
  Vec2 start;         // center at t = 0
  Vec2 end;           // center at t = 1
  VelocityProfile profile;
  Color color{1.0, 1.0, 1.0};

  // Center at time t. Defined for any t (the profiles are polynomials), so
  // frames outside [0, 1] can be synthesized for multi-frame fixtures.
  Vec2 center(double t) const;
};

struct SceneSpec {
  Size canvas{16, 16};
  int channels = 1;
  std::vector<Shape> shapes;  // later shapes are drawn on top
  Color background{0.1, 0.1, 0.1};
  std::uint64_t seed = 0;

  // Throws when a shape leaves the canvas somewhere on t in [0, 1].
  void validate() const;
};

// 4x4 supersampled coverage of each shape at its position at time t.
Frame rasterize(const SceneSpec& spec, double t);

// Flow anchored on the frame at `from`: pixels covered by a shape there
// move with the top-most such shape from `from` to `to`, others are still.
FlowField anchored_flow(const SceneSpec& spec, double from, double to);

struct RenderedScene {
  Frame frame;
  FlowField v0t;
  DistanceMap d_true;
};

// Frame at t in [0, 1] with its analytic flow from time 0 and the distance
// map obtained by projecting that flow onto the full I0 -> I1 flow.
RenderedScene render_scene(const SceneSpec& spec, double t);

struct TripletSample {
  Frame i0;
  Frame i1;
  Frame it;
  double t = 0.0;
  DistanceMap d_true;
  FlowField v01;
  FlowField v0t;
  VelocityProfile profile;
};

// Same endpoints, many velocity profiles. One profile gives the constant
// profile; two or more start with accelerate and decelerate, the rest are
// drawn from `seed`. Every shape of `base` takes the sample's profile.
std::vector<TripletSample> make_dataset(const SceneSpec& base, int n_profiles, const std::vector<double>& timesteps,
                                        std::uint64_t seed, int threads = 1);

// A small square sliding 4 px along a thin gray strip.
SceneSpec default_scene();

// Luma-weighted centroid of pixels differing from `background` by more than
// `threshold`, restricted to the rectangle [x0, x1) x [y0, y1).
Vec2 object_centroid(const Frame& frame, double background, int x0, int y0, int x1, int y1,
                     double threshold = 1e-3);

// ---------------------------------------------------------------------------
// Regressor

enum class Indexing { Time, Distance };

const char* to_string(Indexing indexing);
Indexing parse_indexing(const std::string& name);

// Two-layer perceptron y = w2 . act(W1 x + b1) + b2 with act = tanh, or the
// identity when `linear` is set.
class TinyModel {
 public:
  TinyModel() = default;
  TinyModel(int input_dim, int hidden, std::uint64_t seed, bool linear = false);

  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }
  bool linear() const { return linear_; }

  double predict(const double* x) const;

  // All weights flattened as W1 (hidden x input, row-major), b1, w2, b2.
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  friend bool operator==(const TinyModel&, const TinyModel&) = default;

 private:
  int input_dim_ = 0;
  int hidden_ = 0;
  bool linear_ = false;
  std::vector<double> params_;
};

// Training rows. Identical (features, target) rows may be merged, with the
// multiplicity kept in `count`; the loss is the count-weighted mean.
struct Batch {
  int input_dim = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> count;

  std::size_t rows() const { return y.size(); }
  void add(const std::vector<double>& features, double target, double multiplicity = 1.0);
  // Merges identical rows. Row order follows first occurrence.
  Batch merged() const;
};

// Loss and gradient of the count-weighted mean squared error.
double loss(const TinyModel& model, const Batch& batch);
double loss_and_gradient(const TinyModel& model, const Batch& batch, std::vector<double>& grad);

struct TrainOptions {
  int epochs = 2000;
  double lr = 0.05;
  // Heavy-ball coefficient; 0 is plain gradient descent.
  double momentum = 0.9;
};

// Full-batch gradient descent. Entry k of the curve is the loss before
// update k. Throws Divergence when the loss stops being finite.
std::vector<double> train(TinyModel& model, const Batch& batch, const TrainOptions& options = {});

// Max over weights of |analytic - numeric| / max(|analytic|, |numeric|, floor)
// with central differences of step eps.
inline constexpr double kGradCheckFloor = 1e-8;
double gradient_check(const TinyModel& model, const Batch& batch, double eps = 1e-5);

inline constexpr int kPatch = 5;
inline constexpr int kHidden = 16;

// Features for pixel (y, x): a kPatch x kPatch luma patch of I0, the same
// of I1 (border clamped), then the index value.
std::vector<double> pixel_features(const Frame& i0, const Frame& i1, int y, int x, double index);

// Index value of a sample: t for time indexing; for distance indexing the
// sample's d_true at moving pixels, and the mean d_true over moving pixels
// elsewhere (static pixels carry no ratio of their own).
DistanceMap index_plane(const TripletSample& sample, Indexing indexing);

// One row per sample pixel, target it's luma. Rows are merged.
Batch build_batch(const std::vector<TripletSample>& data, Indexing indexing);

TinyModel make_model(std::uint64_t seed, bool linear = false);

// Scalar toy: input 1, one row per target. Returns the converged output.
double train_scalar_toy(const std::vector<double>& targets, std::uint64_t seed, const TrainOptions& options = {});

struct ConflictRow {
  int sample = 0;
  int y = 0;
  int x = 0;
  double t = 0.0;
  double target = 0.0;
  double mean_target = 0.0;
  double time_output = 0.0;
  double distance_output = 0.0;
};

struct ModeAverageReport {
  std::vector<ConflictRow> rows;
  std::size_t conflicting_pixels = 0;  // sample pixels, summed over samples
  // Mean |time model - mean target| and mean |distance model - target|
  // over conflicting rows; over all rows when nothing conflicts.
  double time_mean_deviation = 0.0;
  double distance_mean_error = 0.0;
  double tolerance = 2e-2;

  bool time_averages() const { return time_mean_deviation <= tolerance; }
  bool distance_resolves() const { return distance_mean_error <= tolerance; }
  std::string to_csv() const;
};

// Rows with identical time-indexed inputs whose targets differ by more
// than `spread` count as conflicting.
ModeAverageReport mode_average_report(const std::vector<TripletSample>& data, const TinyModel& model_time,
                                      const TinyModel& model_dist, double spread = 0.1);

}  // namespace distix::lab
