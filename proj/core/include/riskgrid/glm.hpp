#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace riskgrid {

struct PoissonOptions {
  int max_iter = 50;
  double tol = 1e-10;  // relative log-likelihood change
  int max_halvings = 10;
  std::optional<Eigen::VectorXd> offset;  // log-scale exposure, default off
};

struct PoissonFit {
  Eigen::VectorXd beta;  // intercept first
  Eigen::VectorXd se;
  Eigen::VectorXd z;
  Eigen::VectorXd p;
  std::vector<std::string> terms;  // "(Intercept)" then feature names
  int iterations = 0;
  bool converged = false;
  double loglik = 0.0;
  std::vector<double> loglik_path;  // per accepted IRLS iteration
  std::vector<std::string> warnings;
};

// Poisson regression with log link, fitted by IRLS on internally standardized
// columns with coefficients back-transformed. X holds the feature columns
// only; the intercept is added here.
PoissonFit fit_poisson(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<std::string>& names,
                       const PoissonOptions& opts = {});

// exp(X beta), columns must match the fit's terms
Eigen::VectorXd predict_poisson(const PoissonFit& fit, const Eigen::MatrixXd& X,
                                const std::vector<std::string>& names);

// two-sided Wald p-values, 2*Phi(-|beta/se|)
Eigen::VectorXd wald_pvalues(const PoissonFit& fit);

double poisson_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& mu);

}  // namespace riskgrid
