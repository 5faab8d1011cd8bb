#include <benchmark/benchmark.h>

#include <vector>

#include "riskgrid/weights.hpp"

namespace {

std::vector<riskgrid::Point> lattice(int nx, int ny) {
  std::vector<riskgrid::Point> pts;
  pts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      pts.push_back({ix * 1000.0, iy * 1000.0});
  return pts;
}

void BM_knn_neighbors(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto pts = lattice(side, side);
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::knn_neighbors(pts, 8));
  }
  state.SetComplexityN(state.range(0) * state.range(0));
}
BENCHMARK(BM_knn_neighbors)->Arg(20)->Arg(40)->Arg(60)->Complexity();

void BM_spectrum(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto W =
      riskgrid::row_standardize(riskgrid::knn_neighbors(lattice(side, side), 8));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::spectrum(W));
  }
}
BENCHMARK(BM_spectrum)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_spatial_lag(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto W =
      riskgrid::row_standardize(riskgrid::knn_neighbors(lattice(side, side), 8));
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(W.n(), 0.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::spatial_lag(W, x));
  }
}
BENCHMARK(BM_spatial_lag)->Arg(30)->Arg(60);

}  // namespace
