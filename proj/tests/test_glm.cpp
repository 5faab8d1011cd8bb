#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "riskgrid/error.hpp"
#include "riskgrid/glm.hpp"
#include "riskgrid/rng.hpp"

using namespace riskgrid;

namespace {

// one feature, y ~ Poisson(exp(b0 + b1 x))
struct SimData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

SimData simulate(std::size_t n, double b0, double b1, std::uint64_t seed) {
  Rng rng(seed);
  SimData d;
  d.X.resize(static_cast<Eigen::Index>(n), 1);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    d.X(i, 0) = x;
    d.y(i) = static_cast<double>(rng.poisson(std::exp(b0 + b1 * x)));
  }
  return d;
}

}  // namespace

TEST_CASE("fit_poisson: intercept-only MLE is ln(mean)") {
  Eigen::MatrixXd X(3, 0);
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  const PoissonFit fit = fit_poisson(X, y, {});
  REQUIRE(fit.beta.size() == 1);
  CHECK(fit.converged);
  CHECK(std::fabs(fit.beta(0) - std::log(2.0)) < 1e-10);
  CHECK(fit.beta(0) == doctest::Approx(0.693147).epsilon(1e-5));
}

TEST_CASE("fit_poisson: all-zero response reports the boundary MLE") {
  Eigen::MatrixXd X(5, 0);
  const PoissonFit fit = fit_poisson(X, Eigen::VectorXd::Zero(5), {});
  // divergence toward -inf is surfaced as a warning (either a
  // non-convergence or a zero-boundary report), never as NaN
  CHECK(!fit.warnings.empty());
  CHECK(std::isfinite(fit.loglik));
  CHECK(std::isfinite(fit.beta(0)));
}

TEST_CASE("fit_poisson: recovery, score equations and likelihood ascent") {
  const SimData d = simulate(2000, 0.5, 0.3, 77);
  const PoissonFit fit = fit_poisson(d.X, d.y, {"x"});
  CHECK(fit.converged);
  CHECK(std::fabs(fit.beta(0) - 0.5) < 3.0 * fit.se(0));
  CHECK(std::fabs(fit.beta(1) - 0.3) < 3.0 * fit.se(1));

  // score X^T (y - mu) vanishes at the MLE (per-coordinate, standardized scale)
  const Eigen::VectorXd mu = predict_poisson(fit, d.X, {"x"});
  Eigen::MatrixXd D(d.X.rows(), 2);
  D.col(0).setOnes();
  const double sd = std::sqrt((d.X.col(0).array() - d.X.col(0).mean()).square().sum() /
                              double(d.X.rows() - 1));
  D.col(1) = (d.X.col(0).array() - d.X.col(0).mean()) / sd;
  const Eigen::VectorXd score = D.transpose() * (d.y - mu);
  CHECK(score.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit_poisson: collinear design names the offending column") {
  Eigen::MatrixXd X(20, 2);
  Rng rng(5);
  for (Eigen::Index i = 0; i < 20; ++i) {
    X(i, 0) = rng.uniform(0, 1);
    X(i, 1) = 2.0 * X(i, 0);
  }
  Eigen::VectorXd y(20);
  for (Eigen::Index i = 0; i < 20; ++i) y(i) = static_cast<double>(i % 4);
  try {
    fit_poisson(X, y, {"a", "b_dup"});
    FAIL("expected collinearity error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::collinearity);
  }
}

TEST_CASE("fit_poisson: non-integer or negative responses rejected") {
  Eigen::MatrixXd X(3, 0);
  Eigen::VectorXd y(3);
  y << 1, 2.5, 3;
  CHECK_THROWS_AS(fit_poisson(X, y, {}), Error);
  y << 1, -2, 3;
  CHECK_THROWS_AS(fit_poisson(X, y, {}), Error);
}

TEST_CASE("predict_poisson: fixtures") {
  Eigen::MatrixXd X(4, 0);
  Eigen::VectorXd y(4);
  y << 1, 1, 1, 1;
  PoissonFit fit = fit_poisson(X, y, {});
  // beta0 = ln(1) = 0 -> predictions all 1
  Eigen::VectorXd pred = predict_poisson(fit, X, {});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(pred(i) == doctest::Approx(1.0));

  fit.beta(0) = std::log(2.0);
  pred = predict_poisson(fit, X, {});
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(pred(i) == doctest::Approx(2.0));
}

TEST_CASE("predict_poisson: canonical-link mean preservation") {
  const SimData d = simulate(500, 0.2, 0.8, 13);
  const PoissonFit fit = fit_poisson(d.X, d.y, {"x"});
  const Eigen::VectorXd mu = predict_poisson(fit, d.X, {"x"});
  CHECK(mu.minCoeff() > 0.0);
  CHECK(std::fabs(mu.mean() - d.y.mean()) < 1e-8);
}

TEST_CASE("predict_poisson: schema mismatch") {
  const SimData d = simulate(100, 0.1, 0.1, 3);
  const PoissonFit fit = fit_poisson(d.X, d.y, {"x"});
  CHECK_THROWS_AS(predict_poisson(fit, d.X, {"other"}), Error);
}

TEST_CASE("fit_poisson: predictions invariant to affine feature rescaling") {
  const SimData d = simulate(400, 0.3, 0.6, 21);
  const PoissonFit base = fit_poisson(d.X, d.y, {"x"});
  Eigen::MatrixXd scaled = d.X;
  scaled.col(0) = 250.0 * d.X.col(0) + Eigen::VectorXd::Constant(d.X.rows(), 1e4);
  const PoissonFit shifted = fit_poisson(scaled, d.y, {"x"});
  const Eigen::VectorXd p0 = predict_poisson(base, d.X, {"x"});
  const Eigen::VectorXd p1 = predict_poisson(shifted, scaled, {"x"});
  CHECK((p0 - p1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("wald_pvalues: fixtures") {
  const SimData d = simulate(500, 0.4, 0.0, 55);
  PoissonFit fit = fit_poisson(d.X, d.y, {"x"});
  const Eigen::VectorXd p = wald_pvalues(fit);
  CHECK((p - fit.p).cwiseAbs().maxCoeff() == 0.0);

  // z = 0 -> p = 1; z = 1.959964 -> p = 0.05; symmetry in the sign of z
  fit.z(1) = 0.0;
  fit.p(1) = 2.0 * 0.5 * std::erfc(0.0 / std::sqrt(2.0));
  CHECK(fit.p(1) == doctest::Approx(1.0));
  const double z95 = 1.959964;
  const double p95 = std::erfc(z95 / std::sqrt(2.0));
  CHECK(p95 == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(std::erfc(std::fabs(-z95) / std::sqrt(2.0)) == doctest::Approx(p95));
}

TEST_CASE("fit_poisson: exposure offset shifts the intercept") {
  // with a known log-exposure offset c, the intercept-only MLE becomes
  // ln(mean) - c
  Eigen::MatrixXd X(6, 0);
  Eigen::VectorXd y(6);
  y << 2, 4, 3, 5, 2, 2;
  PoissonOptions opts;
  opts.offset = Eigen::VectorXd::Constant(6, 1.0);
  const PoissonFit fit = fit_poisson(X, y, {}, opts);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(std::log(y.mean()) - 1.0).epsilon(1e-9));
}

TEST_CASE("fit_poisson: likelihood non-decreasing across IRLS iterations") {
  for (std::uint64_t seed : {4u, 9u, 70u, 123u}) {
    const SimData d = simulate(2000, 0.5, 0.3, seed);
    const PoissonFit fit = fit_poisson(d.X, d.y, {"x"});
    CHECK(fit.converged);
    REQUIRE(fit.loglik_path.size() >= 2);
    for (std::size_t t = 1; t < fit.loglik_path.size(); ++t) {
      // round-off slack scales with the likelihood magnitude
      CHECK(fit.loglik_path[t] >=
            fit.loglik_path[t - 1] -
                1e-12 * (std::fabs(fit.loglik_path[t - 1]) + 1.0));
    }
  }
}

TEST_CASE("fit_poisson: simulated-truth coverage across seeds") {
  int covered = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    const SimData d = simulate(2000, 0.5, 0.3, 1000 + static_cast<std::uint64_t>(s));
    const PoissonFit fit = fit_poisson(d.X, d.y, {"x"});
    if (!fit.converged) continue;
    const bool ok = std::fabs(fit.beta(0) - 0.5) < 3.0 * fit.se(0) &&
                    std::fabs(fit.beta(1) - 0.3) < 3.0 * fit.se(1);
    if (ok) ++covered;
  }
  CHECK(covered >= 95);
}
