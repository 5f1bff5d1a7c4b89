#include <benchmark/benchmark.h>

#include <vector>

#include "detkit/box.hpp"
#include "detkit/nms.hpp"
#include "detkit/rng.hpp"
#include "detkit/roi_cluster.hpp"

namespace {

std::vector<detkit::Box> random_boxes(std::size_t n, std::uint64_t seed) {
  detkit::Rng rng(seed);
  std::vector<detkit::Box> boxes;
  boxes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    boxes.emplace_back(rng.uniform(0.0, 1000.0), rng.uniform(0.0, 1000.0),
                       rng.uniform(20.0, 200.0), rng.uniform(20.0, 200.0));
  }
  return boxes;
}

std::vector<double> random_scores(std::size_t n, std::uint64_t seed) {
  detkit::Rng rng(seed);
  std::vector<double> scores(n);
  for (double& s : scores) s = rng.uniform();
  return scores;
}

void BM_Iou(benchmark::State& state) {
  const auto boxes = random_boxes(2, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(detkit::iou(boxes[0], boxes[1]));
  }
}
BENCHMARK(BM_Iou);

void BM_NmsKeep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto boxes = random_boxes(n, 2);
  const auto scores = random_scores(n, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(detkit::nms_keep(boxes, scores, 0.5));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NmsKeep)->Range(64, 2048)->Complexity();

void BM_SoftNms(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto boxes = random_boxes(n, 4);
  const auto scores = random_scores(n, 5);
  const detkit::SoftNmsParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detkit::soft_nms_scores(boxes, scores, params));
  }
}
BENCHMARK(BM_SoftNms)->Range(64, 1024);

void BM_CornerLocalMax(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  detkit::CornerGrid grid(side, side, 0.01, 1);
  detkit::Rng rng(6);
  for (double& p : grid.probs) p = rng.uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(detkit::corner_local_max(grid));
  }
}
BENCHMARK(BM_CornerLocalMax)->Arg(32)->Arg(64)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
