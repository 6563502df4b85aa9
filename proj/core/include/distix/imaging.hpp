#pragma once

// Raster substrate: frames, flow fields, scalar planes, bilinear sampling and
// backward / forward warping.
//
// Conventions: pixel centers sit at integer coordinates, x grows rightward
// and y downward, flow (u, v) = (dx, dy) in pixels. Out-of-bounds reads are
// clamped to the border.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "distix/error.hpp"

namespace distix {

struct Size {
  int height = 0;
  int width = 0;

  friend bool operator==(const Size&, const Size&) = default;
  std::size_t pixels() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
};

std::string to_string(Size size);

// Throws DimensionMismatch naming `what` when the sizes differ.
void require_same_size(Size a, Size b, const char* what);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
};

// H x W x C image, C in {1, 3}, row-major interleaved, values in [0, 1].
class Frame {
 public:
  static constexpr int kMaxChannels = 3;

  Frame() = default;
  Frame(int height, int width, int channels, double fill = 0.0);
  // Validates length, range and finiteness.
  Frame(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  Size size() const { return {height_, width_}; }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Mean over channels at one pixel.
  double luma(int y, int x) const;
  Frame to_gray() const;

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Single-channel double plane. The tag keeps semantically different planes
// (masks, splat weights, distance maps) from being mixed up.
template <typename Tag>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, double fill = 0.0)
      : height_(height), width_(width), data_(checked_area(height, width), fill) {}
  Plane(int height, int width, std::vector<double> data) : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != checked_area(height, width)) {
      fail(ErrorKind::InvalidArgument, "plane data length does not match " + to_string(size()));
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  static std::size_t checked_area(int height, int width) {
    if (height <= 0 || width <= 0) {
      fail(ErrorKind::InvalidArgument, "plane dimensions must be positive");
    }
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

struct MaskTag {};
struct WeightTag {};
struct ImportanceTag {};

// Per-pixel blend / object weight in [0, 1].
using MaskImage = Plane<MaskTag>;
// Accumulated bilinear splat mass; 0 marks a hole. Not bounded by 1.
using WeightMap = Plane<WeightTag>;
// Positive multiplicative splat priority per source pixel.
using ImportanceMap = Plane<ImportanceTag>;

class FlowField {
 public:
  FlowField() = default;
  FlowField(int height, int width, Vec2 fill = {});

  int height() const { return height_; }
  int width() const { return width_; }
  Size size() const { return {height_, width_}; }
  bool empty() const { return data_.empty(); }

  Vec2& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  const Vec2& at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<Vec2> data() { return data_; }
  std::span<const Vec2> data() const { return data_; }

  friend bool operator==(const FlowField&, const FlowField&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Vec2> data_;
};

FlowField operator*(const FlowField& flow, double s);
FlowField operator-(const FlowField& a, const FlowField& b);
FlowField negate(const FlowField& flow);

using Color = std::array<double, Frame::kMaxChannels>;

// Bilinear interpolation with border replication. Unused channels are 0.
Color bilinear_sample(const Frame& frame, double x, double y);

// output(p) = bilinear_sample(frame, p + flow(p)).
Frame backward_warp(const Frame& frame, const FlowField& flow);

// Importances within this ratio of a layer's front source join that layer.
inline constexpr double kSplatLayerRatio = 0.5;

// Pixels whose accumulated splat mass is at or below this are holes.
inline constexpr double kSplatHoleThreshold = 1e-4;

struct SplatResult {
  Frame frame;
  WeightMap weight;
};

// Each source pixel p deposits its value on the four integer neighbours of
// p + flow(p) with bilinear weights. The output is the normalized
// accumulation; the returned weight map is the raw bilinear mass with holes
// forced to 0.
SplatResult forward_warp_splat(const Frame& frame, const FlowField& flow);

// Same, but contributions are composited front to back in order of
// importance(p): sources within kSplatLayerRatio of each other form one
// layer and are averaged, and each layer only fills the bilinear coverage
// (out of 1) left by the layers in front. High-importance sources thus
// occlude low-importance ones where they fully cover a pixel. Sources of
// importance 0 are ignored. The weight map is unaffected.
SplatResult forward_warp_splat(const Frame& frame, const FlowField& flow, const ImportanceMap& importance);

// exp(min(sharpness * |flow|, 40)): moving content is splatted in front of
// static content. sharpness = 0 gives uniform importance.
ImportanceMap motion_importance(const FlowField& flow, double sharpness);

// Splats an arbitrary per-pixel vector (channels values per pixel,
// interleaved) along `flow`. Used to carry flows and maps onto another grid.
// Holes get `hole_value` and weight 0.
struct FieldSplat {
  std::vector<double> values;
  WeightMap weight;
};
FieldSplat splat_field(std::span<const double> values, int channels, const FlowField& flow,
                       const ImportanceMap* importance, double hole_value = 0.0);

}  // namespace distix
