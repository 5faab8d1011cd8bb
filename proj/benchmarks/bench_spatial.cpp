#include <benchmark/benchmark.h>

#include "riskgrid/rng.hpp"
#include "riskgrid/spatial_econ.hpp"

namespace {

struct Problem {
  riskgrid::SpatialWeights W;
  riskgrid::Spectrum spec;
  riskgrid::SpatialDesign design;
  Eigen::VectorXd y;
};

Problem make_problem(int side) {
  std::vector<riskgrid::Point> pts;
  for (int iy = 0; iy < side; ++iy)
    for (int ix = 0; ix < side; ++ix)
      pts.push_back({ix * 1000.0, iy * 1000.0});
  Problem p{riskgrid::row_standardize(riskgrid::knn_neighbors(pts, 8)),
            {}, {}, {}};
  p.spec = riskgrid::spectrum(p.W);

  riskgrid::Rng rng(5);
  const auto n = static_cast<Eigen::Index>(p.W.n());
  Eigen::MatrixXd X(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
  }
  p.design = riskgrid::build_spatial_design(X, {"x0", "x1"}, p.W);
  p.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    p.y(i) = 1.0 + 0.5 * X(i, 0) + rng.normal();
  return p;
}

void BM_sdem_profile_eval(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        riskgrid::sdem_loglik(0.4, p.design.Z, p.y, p.W, p.spec));
  }
}
BENCHMARK(BM_sdem_profile_eval)->Arg(20)->Arg(30);

void BM_fit_sdem(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::fit_sdem(p.design, p.y, p.W, p.spec));
  }
}
BENCHMARK(BM_fit_sdem)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_fit_manski(benchmark::State& state) {
  const Problem p = make_problem(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riskgrid::fit_manski(p.design, p.y, p.W, p.spec));
  }
}
BENCHMARK(BM_fit_manski)->Arg(15)->Arg(30)->Unit(benchmark::kMillisecond);

}  // namespace
