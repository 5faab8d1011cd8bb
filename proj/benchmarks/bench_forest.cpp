#include <benchmark/benchmark.h>

#include "riskgrid/forest.hpp"
#include "riskgrid/rng.hpp"

namespace {

struct Data {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};

Data make_data(int n, int p) {
  riskgrid::Rng rng(11);
  Data d;
  d.X.resize(n, p);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.X(i, j) = rng.uniform(-2.0, 2.0);
    d.y(i) = d.X(i, 0) - 0.5 * d.X(i, 1 % p) + rng.normal();
  }
  for (int j = 0; j < p; ++j) d.names.push_back("f" + std::to_string(j));
  return d;
}

void BM_fit_forest(benchmark::State& state) {
  const Data d = make_data(static_cast<int>(state.range(0)), 10);
  riskgrid::ForestOptions opts;
  opts.n_trees = static_cast<int>(state.range(1));
  opts.seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::fit_forest(d.X, d.y, d.names, opts));
  }
}
BENCHMARK(BM_fit_forest)->Args({300, 100})->Args({1000, 100})->Args({300, 500})
    ->Unit(benchmark::kMillisecond);

void BM_fit_cart(benchmark::State& state) {
  const Data d = make_data(static_cast<int>(state.range(0)), 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::fit_cart(d.X, d.y, 5));
  }
}
BENCHMARK(BM_fit_cart)->Arg(300)->Arg(3000)->Unit(benchmark::kMillisecond);

void BM_predict_forest(benchmark::State& state) {
  const Data d = make_data(1000, 10);
  riskgrid::ForestOptions opts;
  opts.n_trees = 200;
  const riskgrid::Forest forest = riskgrid::fit_forest(d.X, d.y, d.names, opts);
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::predict_forest(forest, d.X, d.names));
  }
}
BENCHMARK(BM_predict_forest);

}  // namespace
