#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "riskgrid/weights.hpp"

namespace riskgrid {

// Z = [1 | X | WX] with lag columns named "lag_<feature>". Lag columns that
// duplicate an existing column (a constant's lag equals itself) are dropped
// with a warning.
struct SpatialDesign {
  Eigen::MatrixXd Z;
  std::vector<std::string> names;  // "(Intercept)", features, lag_ features
  std::vector<std::string> dropped;
  std::vector<std::string> warnings;
};

SpatialDesign build_spatial_design(const Eigen::MatrixXd& X,
                                   const std::vector<std::string>& names,
                                   const SpatialWeights& W);

// profile likelihood value with the closed-form coefficient and variance
// estimates at the given spatial parameters
struct ProfilePoint {
  double loglik = 0.0;
  Eigen::VectorXd gamma;
  double sigma2 = 0.0;
};

// SDEM: y = Z gamma + u, u = lambda W u + eps. Regress Ay on AZ with
// A = I - lambda W; loglik = -(n/2) ln(2 pi sigma2) + ln|A| - n/2.
ProfilePoint sdem_loglik(double lambda, const Eigen::MatrixXd& Z,
                         const Eigen::VectorXd& y, const SpatialWeights& W,
                         const Spectrum& spec);

// Manski/GNS: y = delta W y + Z gamma + u, u = lambda W u + eps. Regress
// A B y on A Z with B = I - delta W; loglik adds ln|B|.
ProfilePoint manski_loglik(double delta, double lambda, const Eigen::MatrixXd& Z,
                           const Eigen::VectorXd& y, const SpatialWeights& W,
                           const Spectrum& spec);

struct SdemFit {
  Eigen::VectorXd gamma, se, z, p;
  double lambda = 0.0, lambda_se = 0.0, lambda_z = 0.0, lambda_p = 1.0;
  double sigma2 = 0.0, loglik = 0.0;
  bool converged = false;
  std::vector<std::string> names;
  std::vector<std::string> warnings;
};

struct ManskiOptions {
  bool clamp_delta_zero = false;  // constrained diagnostic, reproduces SDEM
  double grid_step = 0.05;
};

struct ManskiFit {
  Eigen::VectorXd gamma, se, z, p;
  double delta = 0.0, delta_se = 0.0, delta_z = 0.0, delta_p = 1.0;
  double lambda = 0.0, lambda_se = 0.0, lambda_z = 0.0, lambda_p = 1.0;
  double sigma2 = 0.0, loglik = 0.0;
  bool converged = false;
  bool weak_identification = false;
  std::vector<std::string> names;
  std::vector<std::string> warnings;
};

// Concentrated-likelihood ML: Brent search over lambda inside the admissible
// interval (1/min_eig + 1e-6, 1 - 1e-6); standard errors from the numerical
// Hessian of the full likelihood in (gamma, lambda, sigma2).
SdemFit fit_sdem(const SpatialDesign& design, const Eigen::VectorXd& y,
                 const SpatialWeights& W, const Spectrum& spec);

// Coarse (delta, lambda) grid at `grid_step` then Nelder-Mead refinement.
ManskiFit fit_manski(const SpatialDesign& design, const Eigen::VectorXd& y,
                     const SpatialWeights& W, const Spectrum& spec,
                     const ManskiOptions& opts = {});

// SDEM trend prediction: Z gamma (the error process has mean zero)
Eigen::VectorXd predict_spatial(const SdemFit& fit, const SpatialDesign& design);

// Manski reduced form: (I - delta W)^{-1} Z gamma via a dense solve
Eigen::VectorXd predict_spatial(const ManskiFit& fit, const SpatialDesign& design,
                                const SpatialWeights& W);

}  // namespace riskgrid
