#include "riskgrid/glm.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "riskgrid/error.hpp"
#include "riskgrid/stats.hpp"

namespace riskgrid {

namespace {

constexpr double kWeightFloor = 1e-10;

// design with intercept column plus standardized features; reports which
// columns were (near-)constant or collinear
struct Standardized {
  Eigen::MatrixXd D;          // n x (1+p)
  Eigen::VectorXd mean, sd;   // per feature
};

Standardized standardize(const Eigen::MatrixXd& X,
                         const std::vector<std::string>& names) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Standardized s;
  s.D.resize(n, p + 1);
  s.D.col(0).setOnes();
  s.mean.resize(p);
  s.sd.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double m = X.col(j).mean();
    const double var = (X.col(j).array() - m).square().sum() /
                       static_cast<double>(n > 1 ? n - 1 : 1);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0))
      fail(errc::collinearity,
           "constant column '" + names[static_cast<std::size_t>(j)] +
               "' (zero variance after standardization)");
    s.mean(j) = m;
    s.sd(j) = sd;
    s.D.col(j + 1) = (X.col(j).array() - m) / sd;
  }
  return s;
}

void check_rank(const Eigen::MatrixXd& D, const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  if (qr.rank() == D.cols()) return;
  // name the columns whose pivots collapsed
  const auto perm = qr.colsPermutation().indices();
  std::string offenders;
  for (Eigen::Index t = qr.rank(); t < D.cols(); ++t) {
    const Eigen::Index col = perm(t);
    if (col == 0) {
      offenders += offenders.empty() ? "(Intercept)" : ", (Intercept)";
    } else {
      const auto& nm = names[static_cast<std::size_t>(col - 1)];
      offenders += offenders.empty() ? nm : ", " + nm;
    }
  }
  fail(errc::collinearity, "design is rank deficient; offending columns: " + offenders);
}

}  // namespace

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = std::max(mu(i), 1e-300);
    ll += y(i) * std::log(m) - m - std::lgamma(y(i) + 1.0);
  }
  return ll;
}

PoissonFit fit_poisson(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<std::string>& names,
                       const PoissonOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (static_cast<std::size_t>(p) != names.size())
    fail(errc::schema_mismatch, "fit_poisson: names/columns mismatch");
  if (y.size() != n) fail(errc::schema_mismatch, "fit_poisson: length(y) != rows(X)");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) < 0.0 || y(i) != std::floor(y(i)))
      fail(errc::bad_input, "fit_poisson: response must be non-negative integers");
  }

  PoissonFit fit;
  fit.terms.reserve(static_cast<std::size_t>(p) + 1);
  fit.terms.emplace_back("(Intercept)");
  for (const auto& nm : names) fit.terms.push_back(nm);

  const Standardized std_design = standardize(X, names);
  const Eigen::MatrixXd& D = std_design.D;
  check_rank(D, names);

  Eigen::VectorXd offset = Eigen::VectorXd::Zero(n);
  if (opts.offset) {
    if (opts.offset->size() != n)
      fail(errc::schema_mismatch, "fit_poisson: offset length mismatch");
    offset = *opts.offset;
  }

  // IRLS on the standardized scale
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
  Eigen::VectorXd mu = (y.array() + 0.5).matrix();
  Eigen::VectorXd eta = mu.array().log().matrix() - offset;
  beta(0) = std::log(std::max(y.mean(), 1e-8));
  eta = D * beta;
  mu = (eta + offset).array().exp();

  double ll = poisson_loglik(y, mu);
  fit.converged = false;

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    fit.iterations = iter;
    Eigen::VectorXd w = mu.cwiseMax(kWeightFloor);
    Eigen::VectorXd working = eta + (y - mu).cwiseQuotient(w);

    const Eigen::MatrixXd DW = D.transpose() * w.asDiagonal();
    const Eigen::MatrixXd H = DW * D;
    const Eigen::VectorXd rhs = DW * working;
    Eigen::VectorXd beta_new = H.ldlt().solve(rhs);

    // step-halving keeps the likelihood non-decreasing on separation-prone
    // data; the acceptance slack scales with |ll| so evaluation round-off
    // near the optimum cannot masquerade as a decrease and stall the solver
    const double slack = 1e-12 * (std::fabs(ll) + 1.0);
    double step = 1.0;
    Eigen::VectorXd candidate;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int h = 0; h <= opts.max_halvings; ++h) {
      candidate = beta + step * (beta_new - beta);
      const Eigen::VectorXd eta_c = D * candidate;
      const Eigen::VectorXd mu_c = (eta_c + offset).array().exp();
      ll_new = poisson_loglik(y, mu_c);
      if (std::isfinite(ll_new) && ll_new >= ll - slack) break;
      step /= 2.0;
    }

    beta = candidate;
    eta = D * beta;
    mu = (eta + offset).array().exp();

    // converged once the likelihood is stationary AND the score equations
    // hold; the flat tail of the likelihood can trip the relative test while
    // the gradient is still ~1e-5
    const double change = std::fabs(ll_new - ll) / (std::fabs(ll_new) + 1.0);
    const double score_inf = (D.transpose() * (y - mu)).cwiseAbs().maxCoeff();
    ll = ll_new;
    fit.loglik_path.push_back(ll);
    if (change < opts.tol && score_inf < 1e-8) {
      fit.converged = true;
      break;
    }
  }
  fit.loglik = ll;
  if (!fit.converged)
    fit.warnings.push_back(
        "IRLS did not converge in " + std::to_string(opts.max_iter) +
        " iterations (possible boundary MLE, e.g. all-zero response)");
  if (mu.maxCoeff() <= 1e-8)
    fit.warnings.push_back(
        "fitted rates at the zero boundary; the MLE diverges to -inf "
        "(all-zero response)");

  // back-transform to the original scale
  fit.beta.resize(p + 1);
  fit.beta(0) = beta(0);
  for (Eigen::Index j = 0; j < p; ++j) {
    fit.beta(j + 1) = beta(j + 1) / std_design.sd(j);
    fit.beta(0) -= beta(j + 1) * std_design.mean(j) / std_design.sd(j);
  }

  // Fisher information at the optimum on the original scale
  Eigen::MatrixXd Dorig(n, p + 1);
  Dorig.col(0).setOnes();
  Dorig.rightCols(p) = X;
  const Eigen::VectorXd w = mu.cwiseMax(kWeightFloor);
  const Eigen::MatrixXd info = Dorig.transpose() * w.asDiagonal() * Dorig;
  const Eigen::MatrixXd cov =
      info.ldlt().solve(Eigen::MatrixXd::Identity(p + 1, p + 1));

  fit.se.resize(p + 1);
  fit.z.resize(p + 1);
  fit.p.resize(p + 1);
  for (Eigen::Index j = 0; j <= p; ++j) {
    const double v = cov(j, j);
    fit.se(j) = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    if (fit.se(j) > 0.0) {
      fit.z(j) = fit.beta(j) / fit.se(j);
      fit.p(j) = stats::two_sided_p(fit.z(j));
    } else {
      fit.z(j) = std::numeric_limits<double>::quiet_NaN();
      fit.p(j) = std::numeric_limits<double>::quiet_NaN();
      fit.warnings.push_back("zero standard error for '" +
                             fit.terms[static_cast<std::size_t>(j)] +
                             "'; p-value reported as missing");
    }
  }
  return fit;
}

Eigen::VectorXd predict_poisson(const PoissonFit& fit, const Eigen::MatrixXd& X,
                                const std::vector<std::string>& names) {
  if (static_cast<std::size_t>(X.cols()) != names.size())
    fail(errc::schema_mismatch, "predict_poisson: names/columns mismatch");
  if (names.size() + 1 != fit.terms.size())
    fail(errc::schema_mismatch, "predict_poisson: column count differs from fit");
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] != fit.terms[j + 1])
      fail(errc::schema_mismatch, "predict_poisson: column '" + names[j] +
                                      "' does not match fitted term '" +
                                      fit.terms[j + 1] + "'");
  }
  Eigen::VectorXd eta =
      Eigen::VectorXd::Constant(X.rows(), fit.beta(0)) + X * fit.beta.tail(X.cols());
  return eta.array().exp();
}

Eigen::VectorXd wald_pvalues(const PoissonFit& fit) {
  if (!fit.converged)
    fail(errc::domain, "wald_pvalues requires a converged fit");
  return fit.p;
}

}  // namespace riskgrid
