#include <benchmark/benchmark.h>

#include <vector>

#include "monest/neuro_kernels.hpp"

using namespace monest;

namespace {

struct Fixture {
  explicit Fixture(std::size_t N) : scene(square_cross_scene(N, 0.8)), th1(N * N), th2(N * N) {
    for (std::size_t k = 0; k < N * N; ++k) {
      th1[k] = 0.6 + 0.001 * static_cast<double>(k % 97);
      th2[k] = 1.1 - 0.001 * static_cast<double>(k % 89);
    }
  }
  NeuroScene scene;
  std::vector<double> th1, th2;
  CellDrives out;
};

void BM_DriveLiteral(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    drive_literal(f.scene.grid, 1.0, f.th1, f.th2, 12.3, 100.0, f.out);
    benchmark::DoNotOptimize(f.out.t1.data());
  }
}

// One stage evaluation with a cached active set.
void BM_DriveMoments(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  MomentDrive md(f.scene.grid, 1.0, 100.0, state.range(1) != 0);
  md.prepare(12.3);
  for (auto _ : state) {
    md.evaluate(f.th1, f.th2, f.out);
    benchmark::DoNotOptimize(f.out.t1.data());
  }
}

// Moment rebuild, paid once per active-set change.
void BM_DriveRebuild(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)));
  MomentDrive md(f.scene.grid, 1.0, 100.0, state.range(1) != 0);
  double t = 0.1;
  for (auto _ : state) {
    md.prepare(t);
    t += 100.0 / static_cast<double>(state.range(0) * state.range(0));
    benchmark::DoNotOptimize(md.rebuilds());
  }
}

}  // namespace

BENCHMARK(BM_DriveLiteral)->Arg(8)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DriveMoments)->Args({20, 0})->Args({20, 1})->Args({100, 0})->Args({100, 1});
BENCHMARK(BM_DriveRebuild)->Args({20, 0})->Args({20, 1})->Args({100, 0})->Args({100, 1})
    ->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
