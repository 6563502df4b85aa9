#include "distix/metrics.hpp"

#include <cmath>
#include <vector>

namespace distix::metrics {

namespace {

void require_same_shape(const Frame& a, const Frame& b, const char* what) {
  require_same_size(a.size(), b.size(), what);
  if (a.channels() != b.channels()) fail(ErrorKind::DimensionMismatch, std::string(what) + ": channel mismatch");
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    k[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable "valid" filtering of a plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1;
  const int ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double mse(const Frame& a, const Frame& b) {
  require_same_shape(a, b, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data().size());
}

double psnr(const Frame& a, const Frame& b) {
  const double e = mse(a, b);
  if (e <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

double ssim(const Frame& a, const Frame& b, const SsimParams& params) {
  require_same_shape(a, b, "ssim");
  const int h = a.height();
  const int w = a.width();
  if (h < params.window || w < params.window) {
    fail(ErrorKind::InvalidArgument, "ssim: image smaller than the " + std::to_string(params.window) + "px window");
  }
  const std::size_t n = a.size().pixels();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      x[i] = a.luma(r, c);
      y[i] = b.luma(r, c);
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
  const std::vector<double> k = gaussian_kernel(params.window, params.sigma);
  const auto mx = filter_valid(x, h, w, k);
  const auto my = filter_valid(y, h, w, k);
  const auto sxx = filter_valid(xx, h, w, k);
  const auto syy = filter_valid(yy, h, w, k);
  const auto sxy = filter_valid(xy, h, w, k);
  const double c1 = std::pow(params.k1 * params.dynamic_range, 2);
  const double c2 = std::pow(params.k2 * params.dynamic_range, 2);

  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

double map_loss(const DistanceMap& d, const DistanceMap& d_ref) {
  require_same_size(d.size(), d_ref.size(), "map_loss");
  double sum = 0.0;
  for (std::size_t i = 0; i < d.data().size(); ++i) {
    const double e = d.data()[i] - d_ref.data()[i];
    sum += e * e;
  }
  return sum / static_cast<double>(d.data().size());
}

MetricReport compare(const Frame& a, const Frame& b) { return {psnr(a, b), ssim(a, b)}; }

}  // namespace distix::metrics
