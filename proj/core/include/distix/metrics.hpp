#pragma once

#include "distix/imaging.hpp"
#include "distix/indexing.hpp"

namespace distix::metrics {

inline constexpr double kPsnrCap = 99.0;

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// 10 log10(1 / MSE) over all channels, capped at kPsnrCap.
double psnr(const Frame& a, const Frame& b);

// Mean of local SSIM over every fully-contained Gaussian window, on luma.
double ssim(const Frame& a, const Frame& b, const SsimParams& params = {});

// Mean squared difference between two distance maps.
double map_loss(const DistanceMap& d, const DistanceMap& d_ref);

double mse(const Frame& a, const Frame& b);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
};

MetricReport compare(const Frame& a, const Frame& b);

}  // namespace distix::metrics
