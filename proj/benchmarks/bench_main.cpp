#include <benchmark/benchmark.h>

#include "distix/iterative.hpp"
#include "distix/lab.hpp"
#include "distix/metrics.hpp"
#include "distix/spline.hpp"
#include "support.hpp"

using namespace distix;

namespace {

// Vimeo-sized canvas with a smooth texture drifting by a fixed flow.
struct Pair {
  Frame i0, i1;
  FlowField v01, v10;
  Pair(int h, int w) : i0(testing::textured_frame(h, w, 3)), v01(h, w, {3.5, -1.25}), v10(h, w, {-3.5, 1.25}) {
    i1 = backward_warp(i0, v10);
  }
};

const Pair& vimeo() {
  static const Pair p(256, 448);
  return p;
}

void BM_BackwardWarp(benchmark::State& state) {
  const Pair& p = vimeo();
  for (auto _ : state) benchmark::DoNotOptimize(backward_warp(p.i0, p.v10));
}
BENCHMARK(BM_BackwardWarp)->Unit(benchmark::kMillisecond);

void BM_ForwardSplat(benchmark::State& state) {
  const Pair& p = vimeo();
  const ImportanceMap imp = motion_importance(p.v01, 4.0);
  for (auto _ : state) benchmark::DoNotOptimize(forward_warp_splat(p.i0, p.v01 * 0.5, imp));
}
BENCHMARK(BM_ForwardSplat)->Unit(benchmark::kMillisecond);

void BM_Interpolate(benchmark::State& state) {
  const Pair& p = vimeo();
  const DistanceMap d = uniform_map(0.5, 256, 448);
  for (auto _ : state) benchmark::DoNotOptimize(interpolate(p.i0, p.i1, p.v01, p.v10, d));
}
BENCHMARK(BM_Interpolate)->Unit(benchmark::kMillisecond);

void BM_Iterative(benchmark::State& state) {
  const Pair& p = vimeo();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(iterative_interpolate(p.i0, p.i1, p.v01, p.v10, 0.5, n));
}
BENCHMARK(BM_Iterative)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_DistanceMap(benchmark::State& state) {
  const Pair& p = vimeo();
  const FlowField half = p.v01 * 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(distance_map_from_flows(half, p.v01));
}
BENCHMARK(BM_DistanceMap)->Unit(benchmark::kMillisecond);

void BM_SplineFit(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Frame g(side, side, 1, 0.5);
  auto v = [](double t) { return Vec2{2.0 * t + 0.3 * t * t, -t + 0.1 * t * t * t}; };
  const spline::MultiFrameSet set{g, g, g, g, FlowField(side, side, v(-1.0)), FlowField(side, side, v(1.0)),
                                  FlowField(side, side, v(2.0))};
  for (auto _ : state) benchmark::DoNotOptimize(spline::fit_trajectory(set));
  state.SetItemsProcessed(state.iterations() * side * side);
}
BENCHMARK(BM_SplineFit)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const Pair& p = vimeo();
  for (auto _ : state) benchmark::DoNotOptimize(metrics::ssim(p.i0, p.i1));
}
BENCHMARK(BM_Ssim)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  const auto data = lab::make_dataset(lab::default_scene(), 2, {0.25, 0.5, 0.75}, 1);
  const lab::Batch batch = lab::build_batch(data, lab::Indexing::Distance);
  lab::TinyModel model = lab::make_model(0);
  const lab::TrainOptions one{1, 0.05, 0.9};
  for (auto _ : state) benchmark::DoNotOptimize(lab::train(model, batch, one));
  state.counters["rows"] = static_cast<double>(batch.rows());
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
