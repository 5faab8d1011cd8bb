#include <benchmark/benchmark.h>

#include "riskgrid/autocorr.hpp"
#include "riskgrid/rng.hpp"

namespace {

riskgrid::SpatialWeights lattice_weights(int side) {
  std::vector<riskgrid::Point> pts;
  for (int iy = 0; iy < side; ++iy)
    for (int ix = 0; ix < side; ++ix)
      pts.push_back({ix * 1000.0, iy * 1000.0});
  return riskgrid::row_standardize(riskgrid::knn_neighbors(pts, 8));
}

Eigen::VectorXd random_counts(std::size_t n) {
  riskgrid::Rng rng(7);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i)
    y(i) = static_cast<double>(rng.poisson(3.0));
  return y;
}

void BM_global_moran(benchmark::State& state) {
  const auto W = lattice_weights(static_cast<int>(state.range(0)));
  const auto y = random_counts(W.n());
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::global_moran(y, W));
  }
}
BENCHMARK(BM_global_moran)->Arg(20)->Arg(50);

void BM_moran_permutation_999(benchmark::State& state) {
  const auto W = lattice_weights(static_cast<int>(state.range(0)));
  const auto y = random_counts(W.n());
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::moran_permutation_test(y, W, 999, 42));
  }
}
BENCHMARK(BM_moran_permutation_999)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_local_moran(benchmark::State& state) {
  const auto W = lattice_weights(static_cast<int>(state.range(0)));
  const auto y = random_counts(W.n());
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::local_moran(y, W));
  }
}
BENCHMARK(BM_local_moran)->Arg(20)->Arg(50);

}  // namespace
