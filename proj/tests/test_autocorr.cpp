#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>

#include "riskgrid/autocorr.hpp"
#include "riskgrid/error.hpp"
#include "riskgrid/rng.hpp"
#include "support/oracles.hpp"

using namespace riskgrid;

namespace {

Eigen::VectorXd random_vector(std::size_t n, Rng& rng) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
  return y;
}

}  // namespace

TEST_CASE("global_moran: 4-cell ring fixture, I = -0.2 exactly") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  const double I = global_moran(y, oracle::ring4());
  CHECK(std::fabs(I - (-0.2)) < 1e-12);
}

TEST_CASE("global_moran: location-scale invariance") {
  const SpatialWeights W = oracle::lattice_weights(6, 6, 8);
  Rng rng(2);
  const Eigen::VectorXd y = random_vector(36, rng);
  const double base = global_moran(y, W);
  CHECK(std::fabs(global_moran((3.7 * y).eval(), W) - base) < 1e-12);
  CHECK(std::fabs(global_moran((y.array() + 11.0).matrix().eval(), W) - base) < 1e-12);
  CHECK(std::fabs(global_moran((-2.0 * y.array() + 5.0).matrix().eval(), W) - base) < 1e-12);
}

TEST_CASE("global_moran: null mean is close to -1/(n-1)") {
  const SpatialWeights W = oracle::lattice_weights(20, 20, 8);
  Rng rng(5);
  const int reps = 200;
  std::vector<double> draws;
  for (int r = 0; r < reps; ++r) {
    draws.push_back(global_moran(random_vector(400, rng), W));
  }
  double mean = 0.0;
  for (double d : draws) mean += d;
  mean /= reps;
  double var = 0.0;
  for (double d : draws) var += (d - mean) * (d - mean);
  var /= (reps - 1);
  const double se = std::sqrt(var / reps);
  CHECK(std::fabs(mean - (-1.0 / 399.0)) < 3.0 * se);
}

TEST_CASE("global_moran: errors") {
  const SpatialWeights W = oracle::lattice_weights(3, 3, 4);
  CHECK_THROWS_AS(global_moran(Eigen::VectorXd::Constant(9, 2.0), W), Error);
  Eigen::VectorXd wrong(4);
  wrong << 1, 2, 3, 4;
  CHECK_THROWS_AS(global_moran(wrong, W), Error);
}

TEST_CASE("moran_permutation_test: pseudo-p floor and tie counting") {
  // strongly clustered surface: the observed I beats every permutation
  const int nx = 10, ny = 10;
  const SpatialWeights W = oracle::lattice_weights(nx, ny, 8);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(100);
  for (int iy = 3; iy < 7; ++iy)
    for (int ix = 3; ix < 7; ++ix) y(iy * nx + ix) = 50.0 + ix + iy;
  const GlobalMoranResult res = moran_permutation_test(y, W, 999, 7);
  CHECK(res.n_sims == 999);
  CHECK(res.expected == doctest::Approx(-1.0 / 99.0));
  CHECK(res.pseudo_p == doctest::Approx(0.001));  // (0+1)/(999+1)
  CHECK(res.pseudo_p >= 1.0 / 1000.0);

  // >= comparison counts ties: a binary vector has few distinct permuted
  // statistics, so duplicates of the observed value must inflate pseudo_p
  Eigen::VectorXd coin = Eigen::VectorXd::Zero(100);
  for (int i = 0; i < 50; ++i) coin(i) = 1.0;
  Rng shuffle_rng(3);
  std::vector<double> vals(100);
  for (int i = 0; i < 100; ++i) vals[static_cast<std::size_t>(i)] = coin(i);
  shuffle_rng.shuffle(vals);
  for (int i = 0; i < 100; ++i) coin(i) = vals[static_cast<std::size_t>(i)];
  const GlobalMoranResult tied = moran_permutation_test(coin, W, 199, 11);
  CHECK(tied.pseudo_p > 1.0 / 200.0);
}

TEST_CASE("moran_permutation_test: deterministic across thread counts") {
  const SpatialWeights W = oracle::lattice_weights(12, 12, 8);
  Rng rng(17);
  const Eigen::VectorXd y = random_vector(144, rng);

  setenv("RISKGRID_THREADS", "1", 1);
  const GlobalMoranResult one = moran_permutation_test(y, W, 499, 23);
  setenv("RISKGRID_THREADS", "8", 1);
  const GlobalMoranResult eight = moran_permutation_test(y, W, 499, 23);
  unsetenv("RISKGRID_THREADS");
  CHECK(one.pseudo_p == eight.pseudo_p);
  CHECK(one.I == eight.I);
}

TEST_CASE("moran_permutation_test: null calibration is conservative") {
  // i.i.d. surfaces: P(pseudo_p <= alpha) should not exceed alpha by more
  // than the tolerance at the tested quantiles
  const SpatialWeights W = oracle::lattice_weights(10, 10, 8);
  const int reps = 500;
  int below_05 = 0, below_10 = 0;
  Rng rng(29);
  for (int r = 0; r < reps; ++r) {
    const Eigen::VectorXd y = random_vector(100, rng);
    const GlobalMoranResult res =
        moran_permutation_test(y, W, 199, 1000 + static_cast<std::uint64_t>(r));
    if (res.pseudo_p <= 0.05) ++below_05;
    if (res.pseudo_p <= 0.10) ++below_10;
  }
  CHECK(below_05 <= static_cast<int>(reps * (0.05 + 0.03)));
  CHECK(below_10 <= static_cast<int>(reps * (0.10 + 0.03)));
}

TEST_CASE("local_moran: ring fixture and additivity") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  const LocalMoranResult res = local_moran(y, oracle::ring4());
  CHECK(std::fabs(res.local_i(0) - (-0.6)) < 1e-12);
  CHECK(std::fabs(res.local_i(1) - 0.2) < 1e-12);
  CHECK(std::fabs(res.local_i(2) - 0.2) < 1e-12);
  CHECK(std::fabs(res.local_i(3) - (-0.6)) < 1e-12);

  // sum I_i = S0 * I with S0 = n for row-standardized weights
  CHECK(std::fabs(res.local_i.sum() - 4.0 * (-0.2)) < 1e-12);

  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(res.p(i) > 0.0);
    CHECK(res.p(i) <= 1.0);
  }
}

TEST_CASE("local_moran: additivity on random instances") {
  Rng rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const int nx = 4 + static_cast<int>(rng.below(6));
    const int ny = 4 + static_cast<int>(rng.below(6));
    const int k = 2 + static_cast<int>(rng.below(5));
    const SpatialWeights W = oracle::lattice_weights(nx, ny, k);
    const Eigen::VectorXd y = random_vector(W.n(), rng);
    const double global = global_moran(y, W);
    const LocalMoranResult res = local_moran(y, W);
    CHECK(std::fabs(res.local_i.sum() - W.s0() * global) < 1e-10);
  }
}

TEST_CASE("local_moran: large-lattice additivity cross-check") {
  const SpatialWeights W = oracle::lattice_weights(30, 30, 8);
  Rng rng(37);
  const Eigen::VectorXd y = random_vector(900, rng);
  const LocalMoranResult res = local_moran(y, W);
  CHECK(std::fabs(res.local_i.sum() / W.s0() - global_moran(y, W)) < 1e-10);
}

TEST_CASE("local_moran: permutation mode agrees with analytical on hotspots") {
  const int nx = 12, ny = 12;
  const SpatialWeights W = oracle::lattice_weights(nx, ny, 8);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(144);
  Rng rng(41);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(0, 1);
  for (int iy = 4; iy < 8; ++iy)
    for (int ix = 4; ix < 8; ++ix) y(iy * nx + ix) += 25.0;

  const LocalMoranResult analytical = local_moran(y, W);
  LocalMoranOptions opts;
  opts.permutation = true;
  opts.n_sims = 999;
  opts.seed = 99;
  const LocalMoranResult perm = local_moran(y, W, opts);

  // the hotspot interior must be extreme under both methods
  const int core = 5 * nx + 5;
  CHECK(analytical.p(core) < 0.01);
  CHECK(perm.p(core) < 0.01);
  // identical I_i either way
  CHECK((analytical.local_i - perm.local_i).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bonferroni_adjust: fixtures") {
  Eigen::VectorXd p(3);
  p << 0.001, 0.5, 0.2;
  const Eigen::VectorXd adj = bonferroni_adjust(p, 10);
  CHECK(adj(0) == doctest::Approx(0.01));
  CHECK(adj(1) == 1.0);  // clamped
  CHECK(adj(2) == doctest::Approx(1.0));

  const Eigen::VectorXd id = bonferroni_adjust(p, 1);
  CHECK((id - p).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd bad(1);
  bad << 1.5;
  CHECK_THROWS_AS(bonferroni_adjust(bad, 2), Error);

  // spdep-style per-cell multiplier: neighbor count + 1
  const Eigen::VectorXd var_adj =
      bonferroni_adjust(p, std::vector<std::size_t>{9, 9, 9});
  CHECK(var_adj(0) == doctest::Approx(0.009));
}

TEST_CASE("classify_clusters: quadrants and the not-significant rule") {
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  LocalMoranResult res = local_moran(y, oracle::ring4());

  res.p_adj = Eigen::VectorXd::Ones(4);
  auto labels = classify_clusters(res, 0.05);
  for (const auto& l : labels) CHECK(l == ClusterLabel::NotSignificant);

  // force significance everywhere: quadrant signs decide
  res.p_adj = Eigen::VectorXd::Zero(4);
  labels = classify_clusters(res, 0.05);
  // cell 3: deviation +1.5, lag deviation (z0+z2)/2 = -0.5 -> HighLow
  CHECK(labels[3] == ClusterLabel::HighLow);
  // cell 0: deviation -1.5, lag deviation +0.5 -> LowHigh
  CHECK(labels[0] == ClusterLabel::LowHigh);

  CHECK_THROWS_AS(classify_clusters(res, 0.0), Error);
}

TEST_CASE("classify_clusters: hotspot recall on a synthetic surface") {
  // single planted hotspot, far field flat noise
  const int nx = 20, ny = 20;
  const SpatialWeights W = oracle::lattice_weights(nx, ny, 8);
  Rng rng(43);
  Eigen::VectorXd y(400);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform(0.0, 2.0);
  std::vector<int> hotspot;
  for (int iy = 8; iy < 12; ++iy)
    for (int ix = 8; ix < 12; ++ix) {
      y(iy * nx + ix) += 60.0;
      hotspot.push_back(iy * nx + ix);
    }

  LocalMoranResult res = local_moran(y, W);
  res.p_adj = bonferroni_adjust(res.p, 400);
  classify_clusters(res, 0.05);

  int hits = 0;
  for (int id : hotspot)
    if (res.labels[static_cast<std::size_t>(id)] == ClusterLabel::HighHigh) ++hits;
  CHECK(hits >= static_cast<int>(0.9 * hotspot.size()));

  int false_pos = 0;
  for (int i = 0; i < 400; ++i) {
    if (std::find(hotspot.begin(), hotspot.end(), i) != hotspot.end()) continue;
    if (res.labels[static_cast<std::size_t>(i)] == ClusterLabel::HighHigh) ++false_pos;
  }
  CHECK(false_pos <= 20);  // 5% of the non-hotspot cells
}
