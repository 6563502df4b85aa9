#include "distix/interpolator.hpp"

#include <algorithm>
#include <cmath>

namespace distix {

const char* to_string(MaskMode mode) {
  switch (mode) {
    case MaskMode::SplatWeight: return "splat_weight";
    case MaskMode::Photometric: return "photometric";
    case MaskMode::Fixed: return "fixed";
  }
  return "?";
}

MaskMode parse_mask_mode(const std::string& name) {
  if (name == "splat_weight") return MaskMode::SplatWeight;
  if (name == "photometric") return MaskMode::Photometric;
  if (name == "fixed") return MaskMode::Fixed;
  fail(ErrorKind::InvalidArgument, "unknown mask mode '" + name + "' (splat_weight, photometric, fixed)");
}

void InterpConfig::validate() const {
  if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "eps must be positive");
  if (!(fixed_alpha >= 0.0 && fixed_alpha <= 1.0)) fail(ErrorKind::InvalidArgument, "fixed_alpha must lie in [0, 1]");
  if (!(photometric_sigma > 0.0)) fail(ErrorKind::InvalidArgument, "photometric_sigma must be positive");
  if (!(splat_sharpness >= 0.0)) fail(ErrorKind::InvalidArgument, "splat_sharpness must be nonnegative");
}

ScaledFlows scaled_flows(const FlowField& v01, const FlowField& v10, const DistanceMap& d) {
  return scaled_flows(v01, v10, d, d);
}

ScaledFlows scaled_flows(const FlowField& v01, const FlowField& v10, const DistanceMap& d_on_i0,
                         const DistanceMap& d_on_i1) {
  require_same_size(v01.size(), v10.size(), "scaled_flows");
  require_same_size(v01.size(), d_on_i0.size(), "scaled_flows");
  require_same_size(v10.size(), d_on_i1.size(), "scaled_flows");
  ScaledFlows out{FlowField(v01.height(), v01.width()), FlowField(v10.height(), v10.width())};
  for (std::size_t i = 0; i < v01.data().size(); ++i) {
    out.f0t.data()[i] = v01.data()[i] * d_on_i0.data()[i];
    out.f1t.data()[i] = v10.data()[i] * (1.0 - d_on_i1.data()[i]);
  }
  return out;
}

WarpPair warp_endpoints(const Frame& i0, const Frame& i1, const FlowField& f0t, const FlowField& f1t,
                        double splat_sharpness) {
  require_same_size(i0.size(), i1.size(), "warp_endpoints");
  if (i0.channels() != i1.channels()) fail(ErrorKind::DimensionMismatch, "warp_endpoints: channel count mismatch");
  SplatResult plus = forward_warp_splat(i0, f0t, motion_importance(f0t, splat_sharpness));
  SplatResult minus = forward_warp_splat(i1, f1t, motion_importance(f1t, splat_sharpness));
  return {std::move(plus.frame), std::move(minus.frame), std::move(plus.weight), std::move(minus.weight)};
}

namespace {

void require_pair(const WarpPair& pair) {
  require_same_size(pair.i_plus.size(), pair.i_minus.size(), "warp pair");
  require_same_size(pair.i_plus.size(), pair.w_plus.size(), "warp pair");
  require_same_size(pair.i_plus.size(), pair.w_minus.size(), "warp pair");
}

// Share of the I0 side. Each side owns its coverage min(w, 1) of the pixel
// and fills what it leaves uncovered from the other side, in proportion to
// the other side's coverage. With both sides fully covered this is 1 - d; a
// partly vacated trailing edge no longer passes off its fraction as a whole.
double temporal_split(double w_plus, double w_minus, double d) {
  const double cp = std::min(w_plus, 1.0);
  const double cm = std::min(w_minus, 1.0);
  if (cp <= 0.0 && cm <= 0.0) return 1.0 - d;
  const double own_plus = cp / (cp + (1.0 - cp) * cm);
  const double own_minus = cm / (cm + (1.0 - cm) * cp);
  return (1.0 - d) * own_plus + d * (1.0 - own_minus);
}

}  // namespace

MaskImage occlusion_mask(const WarpPair& pair, const InterpConfig& config, const DistanceMap& d) {
  require_pair(pair);
  require_same_size(pair.i_plus.size(), d.size(), "occlusion_mask");
  const int h = d.height();
  const int w = d.width();
  MaskImage m(h, w);
  if (config.mask_mode == MaskMode::Fixed) {
    for (double& v : m.data()) v = config.fixed_alpha;
    return m;
  }
  const int channels = pair.i_plus.channels();
  const double inv2s2 = 1.0 / (2.0 * config.photometric_sigma * config.photometric_sigma);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double wp = pair.w_plus.at(y, x);
      const double wm = pair.w_minus.at(y, x);
      const double dd = std::clamp(d.at(y, x), 0.0, 1.0);
      double value = temporal_split(wp, wm, dd);
      if (config.mask_mode == MaskMode::Photometric) {
        double err = 0.0;
        for (int c = 0; c < channels; ++c) {
          const double diff = pair.i_plus.at(y, x, c) - pair.i_minus.at(y, x, c);
          err += diff * diff;
        }
        // Agreeing candidates blend softly; disagreeing ones commit to the
        // temporally nearer valid side so no double image forms.
        const double agreement = std::exp(-err * inv2s2);
        const double hard = wp * (1.0 - dd) >= wm * dd ? 1.0 : 0.0;
        value = agreement * value + (1.0 - agreement) * hard;
      }
      m.at(y, x) = std::clamp(value, 0.0, 1.0);
    }
  }
  return m;
}

std::size_t fill_holes(Frame& frame, std::vector<unsigned char>& hole, const Frame* fallback, int passes) {
  const int h = frame.height();
  const int w = frame.width();
  const int channels = frame.channels();
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < hole.size(); ++i)
    if (hole[i]) pending.push_back(i);

  for (int pass = 0; pass < passes && !pending.empty(); ++pass) {
    std::vector<std::size_t> filled;
    std::vector<double> values;
    std::vector<std::size_t> still;
    for (std::size_t idx : pending) {
      const int y = static_cast<int>(idx / w);
      const int x = static_cast<int>(idx % w);
      double sum[Frame::kMaxChannels] = {};
      int count = 0;
      const int ny[4] = {y - 1, y + 1, y, y};
      const int nx[4] = {x, x, x - 1, x + 1};
      for (int k = 0; k < 4; ++k) {
        if (ny[k] < 0 || ny[k] >= h || nx[k] < 0 || nx[k] >= w) continue;
        if (hole[static_cast<std::size_t>(ny[k]) * w + nx[k]]) continue;
        for (int c = 0; c < channels; ++c) sum[c] += frame.at(ny[k], nx[k], c);
        ++count;
      }
      if (count == 0) {
        still.push_back(idx);
        continue;
      }
      filled.push_back(idx);
      for (int c = 0; c < channels; ++c) values.push_back(sum[c] / count);
    }
    // Commit after the sweep so each pass only reads the previous state.
    for (std::size_t k = 0; k < filled.size(); ++k) {
      const std::size_t idx = filled[k];
      for (int c = 0; c < channels; ++c) frame.data()[idx * channels + c] = values[k * channels + c];
      hole[idx] = 0;
    }
    pending = std::move(still);
  }

  if (fallback != nullptr) {
    for (std::size_t idx : pending) {
      for (int c = 0; c < channels; ++c) frame.data()[idx * channels + c] = fallback->data()[idx * channels + c];
      hole[idx] = 0;
    }
    return 0;
  }
  return pending.size();
}

namespace {

Frame blend_impl(const WarpPair& pair, const MaskImage& m, const Frame* fallback) {
  require_pair(pair);
  require_same_size(pair.i_plus.size(), m.size(), "blend_two");
  if (fallback != nullptr) require_same_size(pair.i_plus.size(), fallback->size(), "blend_two fallback");
  const int channels = pair.i_plus.channels();
  Frame out(pair.i_plus.height(), pair.i_plus.width(), channels);
  std::vector<unsigned char> hole(out.size().pixels(), 0);
  const auto ip = pair.i_plus.data();
  const auto im = pair.i_minus.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < hole.size(); ++i) {
    const bool plus_ok = pair.w_plus.data()[i] > kSplatHoleThreshold;
    const bool minus_ok = pair.w_minus.data()[i] > kSplatHoleThreshold;
    double alpha = std::clamp(m.data()[i], 0.0, 1.0);
    if (plus_ok && !minus_ok) alpha = 1.0;
    if (!plus_ok && minus_ok) alpha = 0.0;
    if (!plus_ok && !minus_ok) {
      hole[i] = 1;
      continue;
    }
    for (int c = 0; c < channels; ++c) {
      const std::size_t k = i * channels + c;
      dst[k] = std::clamp(alpha * ip[k] + (1.0 - alpha) * im[k], 0.0, 1.0);
    }
  }
  fill_holes(out, hole, fallback);
  return out;
}

}  // namespace

Frame blend_two(const WarpPair& pair, const MaskImage& m) { return blend_impl(pair, m, nullptr); }

Frame blend_two(const WarpPair& pair, const MaskImage& m, const Frame& fallback) {
  return blend_impl(pair, m, &fallback);
}

Frame nearer_endpoint(const Frame& i0, const Frame& i1, const DistanceMap& d) {
  require_same_size(i0.size(), i1.size(), "nearer_endpoint");
  require_same_size(i0.size(), d.size(), "nearer_endpoint");
  Frame out = i0;
  const int channels = i0.channels();
  for (std::size_t i = 0; i < d.data().size(); ++i) {
    if (d.data()[i] > 0.5) {
      for (int c = 0; c < channels; ++c) out.data()[i * channels + c] = i1.data()[i * channels + c];
    }
  }
  return out;
}

Frame interpolate(const Frame& i0, const Frame& i1, const FlowField& v01, const FlowField& v10,
                  const DistanceMap& d, const InterpConfig& config) {
  config.validate();
  require_same_size(i0.size(), i1.size(), "interpolate: frames");
  require_same_size(i0.size(), v01.size(), "interpolate: v01");
  require_same_size(i0.size(), v10.size(), "interpolate: v10");
  require_same_size(i0.size(), d.size(), "interpolate: distance map");

  const DistanceMap d0 = clamp01(d);
  const DistanceMap d1 = transport_map(d0, v01, config.splat_sharpness);
  const ScaledFlows flows = scaled_flows(v01, v10, d0, d1);
  const WarpPair pair = warp_endpoints(i0, i1, flows.f0t, flows.f1t, config.splat_sharpness);
  const MaskImage m = occlusion_mask(pair, config, d0);
  return blend_two(pair, m, nearer_endpoint(i0, i1, d0));
}

}  // namespace distix
