#include "riskgrid/spatial_econ.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "riskgrid/error.hpp"
#include "riskgrid/parallel.hpp"
#include "riskgrid/stats.hpp"

namespace riskgrid {

namespace {

constexpr double kEdge = 1e-6;      // keep away from the log-det singularities
constexpr double kSigmaFloor = 1e-280;

Eigen::MatrixXd lag_columns(const SpatialWeights& W, const Eigen::MatrixXd& M) {
  Eigen::MatrixXd out(M.rows(), M.cols());
  for (Eigen::Index j = 0; j < M.cols(); ++j) out.col(j) = spatial_lag(W, M.col(j));
  return out;
}

void check_interval(double value, const Spectrum& spec, const char* name) {
  const double lo = spec.rho_min();
  const double hi = spec.rho_max();
  if (!(value > lo && value < hi))
    fail(errc::domain, std::string(name) + "=" + std::to_string(value) +
                           " outside the admissible interval (" +
                           std::to_string(lo) + ", " + std::to_string(hi) + ")");
}

// gaussian profile pieces shared by both models: regress r on AZ where
// r = A * (target); returns gamma, sigma2 = RSS/n and the loglik given the
// summed log-determinant term
ProfilePoint profile_gaussian(const Eigen::MatrixXd& AZ, const Eigen::VectorXd& r,
                              double log_det_sum) {
  const double n = static_cast<double>(r.size());
  ProfilePoint pt;
  pt.gamma = AZ.householderQr().solve(r);
  const double rss = (r - AZ * pt.gamma).squaredNorm();
  pt.sigma2 = rss / n;
  const double s2 = std::max(pt.sigma2, kSigmaFloor);
  pt.loglik = -0.5 * n * std::log(2.0 * M_PI * s2) + log_det_sum - 0.5 * n;
  return pt;
}

// Brent's minimizer on [a, b]
double brent_min(const std::function<double(double)>& f, double a, double b,
                 double tol, int max_iter, double* f_at_min) {
  const double gold = 0.3819660112501051;
  double x = a + gold * (b - a), w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < max_iter; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol * std::fabs(x) + 1e-12;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool use_golden = true;
    if (std::fabs(e) > tol1) {
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double e_tmp = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_tmp) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm > x ? tol1 : -tol1;
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x >= xm ? a : b) - x;
      d = gold * e;
    }
    const double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  if (f_at_min) *f_at_min = fx;
  return x;
}

// Nelder-Mead in 2 dimensions with box penalty
Eigen::Vector2d nelder_mead_2d(const std::function<double(const Eigen::Vector2d&)>& f,
                               Eigen::Vector2d start, double scale, double tol,
                               int max_iter) {
  std::array<Eigen::Vector2d, 3> simplex{start,
                                         start + Eigen::Vector2d(scale, 0.0),
                                         start + Eigen::Vector2d(0.0, scale)};
  std::array<double, 3> fv{f(simplex[0]), f(simplex[1]), f(simplex[2])};

  auto order = [&]() {
    for (int i = 0; i < 2; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        if (fv[j] < fv[i]) {
          std::swap(fv[i], fv[j]);
          std::swap(simplex[i], simplex[j]);
        }
      }
    }
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    order();
    const double spread = std::max((simplex[1] - simplex[0]).norm(),
                                   (simplex[2] - simplex[0]).norm());
    if (spread < tol) break;
    const Eigen::Vector2d centroid = 0.5 * (simplex[0] + simplex[1]);
    const Eigen::Vector2d reflected = centroid + (centroid - simplex[2]);
    const double fr = f(reflected);
    if (fr < fv[0]) {
      const Eigen::Vector2d expanded = centroid + 2.0 * (centroid - simplex[2]);
      const double fe = f(expanded);
      if (fe < fr) {
        simplex[2] = expanded; fv[2] = fe;
      } else {
        simplex[2] = reflected; fv[2] = fr;
      }
    } else if (fr < fv[1]) {
      simplex[2] = reflected; fv[2] = fr;
    } else {
      const Eigen::Vector2d contracted = centroid + 0.5 * (simplex[2] - centroid);
      const double fc = f(contracted);
      if (fc < fv[2]) {
        simplex[2] = contracted; fv[2] = fc;
      } else {
        simplex[1] = simplex[0] + 0.5 * (simplex[1] - simplex[0]);
        simplex[2] = simplex[0] + 0.5 * (simplex[2] - simplex[0]);
        fv[1] = f(simplex[1]);
        fv[2] = f(simplex[2]);
      }
    }
  }
  order();
  return simplex[0];
}

// central-difference Hessian with per-coordinate relative step 1e-5
Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f,
                                const Eigen::VectorXd& x) {
  const Eigen::Index k = x.size();
  Eigen::VectorXd h(k);
  for (Eigen::Index i = 0; i < k; ++i) h(i) = 1e-5 * std::max(std::fabs(x(i)), 1.0);
  Eigen::MatrixXd H(k, k);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      if (i == j) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h(i);
        xm(i) -= h(i);
        H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h(i) * h(i));
      } else {
        Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
        xpp(i) += h(i); xpp(j) += h(j);
        xpm(i) += h(i); xpm(j) -= h(j);
        xmp(i) -= h(i); xmp(j) += h(j);
        xmm(i) -= h(i); xmm(j) -= h(j);
        H(i, j) = H(j, i) =
            (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h(i) * h(j));
      }
    }
  }
  return H;
}

struct WaldBlock {
  Eigen::VectorXd se, z, p;
  bool ok = false;
  double condition = 0.0;
};

WaldBlock wald_from_hessian(const std::function<double(const Eigen::VectorXd&)>& ll,
                            const Eigen::VectorXd& theta) {
  WaldBlock out;
  const Eigen::MatrixXd H = numeric_hessian(ll, theta);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(-H, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  out.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / (sv(sv.size() - 1))
                                          : std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd cov = (-H).ldlt().solve(
      Eigen::MatrixXd::Identity(theta.size(), theta.size()));
  out.se.resize(theta.size());
  out.z.resize(theta.size());
  out.p.resize(theta.size());
  out.ok = true;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double v = cov(i, i);
    if (v > 0.0 && std::isfinite(v)) {
      out.se(i) = std::sqrt(v);
      out.z(i) = theta(i) / out.se(i);
      out.p(i) = stats::two_sided_p(out.z(i));
    } else {
      out.se(i) = out.z(i) = out.p(i) = std::numeric_limits<double>::quiet_NaN();
      out.ok = false;
    }
  }
  return out;
}

}  // namespace

SpatialDesign build_spatial_design(const Eigen::MatrixXd& X,
                                   const std::vector<std::string>& names,
                                   const SpatialWeights& W) {
  if (static_cast<std::size_t>(X.cols()) != names.size())
    fail(errc::schema_mismatch, "build_spatial_design: names/columns mismatch");
  if (static_cast<std::size_t>(X.rows()) != W.n())
    fail(errc::schema_mismatch, "build_spatial_design: rows(X) != n");
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!X.col(j).allFinite())
      fail(errc::bad_input, "column '" + names[static_cast<std::size_t>(j)] +
                                "' has non-finite values");
  }

  const Eigen::MatrixXd WX = lag_columns(W, X);

  SpatialDesign d;
  std::vector<Eigen::VectorXd> cols;
  cols.emplace_back(Eigen::VectorXd::Ones(X.rows()));
  d.names.emplace_back("(Intercept)");

  // Constant columns are absorbed by the intercept and exact duplicates of a
  // kept column are dropped, both with a warning; Wc = c for row-standardized
  // weights, so a constant feature sheds both itself and its lag here.
  auto add_column = [&](const std::string& name, const Eigen::VectorXd& col) {
    const double spread = col.maxCoeff() - col.minCoeff();
    if (spread <= 1e-12 * std::max(1.0, col.cwiseAbs().maxCoeff())) {
      d.dropped.push_back(name);
      d.warnings.push_back("dropped constant column '" + name +
                           "' (absorbed by the intercept)");
      return;
    }
    for (std::size_t e = 1; e < cols.size(); ++e) {
      const double scale = std::max(1.0, cols[e].cwiseAbs().maxCoeff());
      if ((cols[e] - col).cwiseAbs().maxCoeff() <= 1e-9 * scale) {
        d.dropped.push_back(name);
        d.warnings.push_back("dropped column '" + name + "' (duplicates '" +
                             d.names[e] + "')");
        return;
      }
    }
    cols.emplace_back(col);
    d.names.push_back(name);
  };

  for (Eigen::Index j = 0; j < X.cols(); ++j)
    add_column(names[static_cast<std::size_t>(j)], X.col(j));
  for (Eigen::Index j = 0; j < WX.cols(); ++j)
    add_column("lag_" + names[static_cast<std::size_t>(j)], WX.col(j));

  d.Z.resize(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    d.Z.col(static_cast<Eigen::Index>(j)) = cols[j];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.Z);
  qr.setThreshold(1e-10);
  if (qr.rank() < d.Z.cols()) {
    const auto perm = qr.colsPermutation().indices();
    std::string offenders;
    for (Eigen::Index t = qr.rank(); t < d.Z.cols(); ++t) {
      const auto& nm = d.names[static_cast<std::size_t>(perm(t))];
      offenders += offenders.empty() ? nm : ", " + nm;
    }
    fail(errc::collinearity,
         "spatial design is rank deficient; offending columns: " + offenders);
  }
  return d;
}

ProfilePoint sdem_loglik(double lambda, const Eigen::MatrixXd& Z,
                         const Eigen::VectorXd& y, const SpatialWeights& W,
                         const Spectrum& spec) {
  check_interval(lambda, spec, "lambda");
  const Eigen::MatrixXd AZ = Z - lambda * lag_columns(W, Z);
  const Eigen::VectorXd Ay = y - lambda * spatial_lag(W, y);
  return profile_gaussian(AZ, Ay, spec.log_det(lambda));
}

ProfilePoint manski_loglik(double delta, double lambda, const Eigen::MatrixXd& Z,
                           const Eigen::VectorXd& y, const SpatialWeights& W,
                           const Spectrum& spec) {
  check_interval(delta, spec, "delta");
  check_interval(lambda, spec, "lambda");
  const Eigen::VectorXd By = y - delta * spatial_lag(W, y);
  const Eigen::MatrixXd AZ = Z - lambda * lag_columns(W, Z);
  const Eigen::VectorXd ABy = By - lambda * spatial_lag(W, By);
  return profile_gaussian(AZ, ABy, spec.log_det(delta) + spec.log_det(lambda));
}

SdemFit fit_sdem(const SpatialDesign& design, const Eigen::VectorXd& y,
                 const SpatialWeights& W, const Spectrum& spec) {
  const double lo = spec.rho_min() + kEdge;
  const double hi = spec.rho_max() - kEdge;

  auto negative = [&](double lambda) {
    return -sdem_loglik(lambda, design.Z, y, W, spec).loglik;
  };
  double neg_ll = 0.0;
  const double lambda_hat = brent_min(negative, lo, hi, 1e-8, 200, &neg_ll);

  SdemFit fit;
  fit.names = design.names;
  const ProfilePoint at = sdem_loglik(lambda_hat, design.Z, y, W, spec);
  fit.lambda = lambda_hat;
  fit.gamma = at.gamma;
  fit.sigma2 = at.sigma2;
  fit.loglik = at.loglik;
  fit.converged = true;
  if (lambda_hat - lo < 1e-5 || hi - lambda_hat < 1e-5) {
    fit.converged = false;
    fit.warnings.push_back("lambda converged at the admissible boundary");
  }

  // full-likelihood Hessian in (gamma, lambda, sigma2)
  const Eigen::Index k = design.Z.cols();
  Eigen::VectorXd theta(k + 2);
  theta.head(k) = fit.gamma;
  theta(k) = fit.lambda;
  theta(k + 1) = std::max(fit.sigma2, kSigmaFloor);
  auto full_ll = [&](const Eigen::VectorXd& th) {
    const double lambda = th(k);
    const double s2 = th(k + 1);
    if (!(lambda > lo - 1e-3 && lambda < hi + 1e-3) || !(s2 > 0.0))
      return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd resid = y - design.Z * th.head(k);
    const Eigen::VectorXd Ar = resid - lambda * spatial_lag(W, resid);
    const double n = static_cast<double>(y.size());
    return -0.5 * n * std::log(2.0 * M_PI * s2) + spec.log_det(lambda) -
           Ar.squaredNorm() / (2.0 * s2);
  };
  const WaldBlock wald = wald_from_hessian(full_ll, theta);
  fit.se = wald.se.head(k);
  fit.z = wald.z.head(k);
  fit.p = wald.p.head(k);
  fit.lambda_se = wald.se(k);
  fit.lambda_z = wald.z(k);
  fit.lambda_p = wald.p(k);
  if (!wald.ok)
    fit.warnings.push_back("Hessian not positive definite; some standard errors missing");
  return fit;
}

ManskiFit fit_manski(const SpatialDesign& design, const Eigen::VectorXd& y,
                     const SpatialWeights& W, const Spectrum& spec,
                     const ManskiOptions& opts) {
  const double lo = spec.rho_min() + kEdge;
  const double hi = spec.rho_max() - kEdge;

  ManskiFit fit;
  fit.names = design.names;

  auto value = [&](double delta, double lambda) {
    return manski_loglik(delta, lambda, design.Z, y, W, spec).loglik;
  };

  double best_delta = 0.0, best_lambda = 0.0;

  if (opts.clamp_delta_zero) {
    auto negative = [&](double lambda) { return -value(0.0, lambda); };
    double neg = 0.0;
    best_lambda = brent_min(negative, lo, hi, 1e-8, 200, &neg);
  } else {
    // coarse grid, then Nelder-Mead from the best grid point
    std::vector<double> ticks;
    for (double v = lo; v <= hi; v += opts.grid_step) ticks.push_back(v);
    std::vector<double> row_best_ll(ticks.size(),
                                    -std::numeric_limits<double>::infinity());
    std::vector<double> row_best_delta(ticks.size(), 0.0);

    parallel_for(ticks.size(), [&](std::size_t begin, std::size_t end) {
      for (std::size_t li = begin; li < end; ++li) {
        const double lambda = ticks[li];
        // AZ and its factorization are shared across delta on this row
        const Eigen::MatrixXd AZ = design.Z - lambda * lag_columns(W, design.Z);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(AZ);
        const Eigen::VectorXd Wy = spatial_lag(W, y);
        const Eigen::VectorXd Ay = y - lambda * Wy;
        const Eigen::VectorXd AWy = Wy - lambda * spatial_lag(W, Wy);
        const double ld_lambda = spec.log_det(lambda);
        const double n = static_cast<double>(y.size());
        for (double delta : ticks) {
          const Eigen::VectorXd ABy = Ay - delta * AWy;
          const Eigen::VectorXd gamma = qr.solve(ABy);
          const double rss = (ABy - AZ * gamma).squaredNorm();
          const double s2 = std::max(rss / n, kSigmaFloor);
          const double ll = -0.5 * n * std::log(2.0 * M_PI * s2) +
                            spec.log_det(delta) + ld_lambda - 0.5 * n;
          if (ll > row_best_ll[li]) {
            row_best_ll[li] = ll;
            row_best_delta[li] = delta;
          }
        }
      }
    });

    std::size_t best_row = 0;
    for (std::size_t li = 1; li < ticks.size(); ++li) {
      if (row_best_ll[li] > row_best_ll[best_row]) best_row = li;
    }
    best_lambda = ticks[best_row];
    best_delta = row_best_delta[best_row];

    auto negative2 = [&](const Eigen::Vector2d& v) {
      if (v(0) <= lo || v(0) >= hi || v(1) <= lo || v(1) >= hi)
        return std::numeric_limits<double>::infinity();
      return -value(v(0), v(1));
    };
    const Eigen::Vector2d refined = nelder_mead_2d(
        negative2, Eigen::Vector2d(best_delta, best_lambda),
        opts.grid_step / 2.0, 1e-8, 500);
    best_delta = refined(0);
    best_lambda = refined(1);
  }

  const ProfilePoint at =
      manski_loglik(best_delta, best_lambda, design.Z, y, W, spec);
  fit.delta = best_delta;
  fit.lambda = best_lambda;
  fit.gamma = at.gamma;
  fit.sigma2 = at.sigma2;
  fit.loglik = at.loglik;
  fit.converged = true;
  if (!opts.clamp_delta_zero &&
      (best_delta - lo < 1e-5 || hi - best_delta < 1e-5)) {
    fit.converged = false;
    fit.warnings.push_back("delta converged at the admissible boundary");
  }
  if (best_lambda - lo < 1e-5 || hi - best_lambda < 1e-5) {
    fit.converged = false;
    fit.warnings.push_back("lambda converged at the admissible boundary");
  }

  // Hessian in (gamma, delta, lambda, sigma2)
  const Eigen::Index k = design.Z.cols();
  Eigen::VectorXd theta(k + 3);
  theta.head(k) = fit.gamma;
  theta(k) = fit.delta;
  theta(k + 1) = fit.lambda;
  theta(k + 2) = std::max(fit.sigma2, kSigmaFloor);
  auto full_ll = [&](const Eigen::VectorXd& th) {
    const double delta = th(k);
    const double lambda = th(k + 1);
    const double s2 = th(k + 2);
    if (!(delta > lo - 1e-3 && delta < hi + 1e-3) ||
        !(lambda > lo - 1e-3 && lambda < hi + 1e-3) || !(s2 > 0.0))
      return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd By = y - delta * spatial_lag(W, y);
    const Eigen::VectorXd resid = By - design.Z * th.head(k);
    const Eigen::VectorXd Ar = resid - lambda * spatial_lag(W, resid);
    const double n = static_cast<double>(y.size());
    return -0.5 * n * std::log(2.0 * M_PI * s2) + spec.log_det(delta) +
           spec.log_det(lambda) - Ar.squaredNorm() / (2.0 * s2);
  };
  const WaldBlock wald = wald_from_hessian(full_ll, theta);
  fit.se = wald.se.head(k);
  fit.z = wald.z.head(k);
  fit.p = wald.p.head(k);
  fit.delta_se = wald.se(k);
  fit.delta_z = wald.z(k);
  fit.delta_p = wald.p(k);
  fit.lambda_se = wald.se(k + 1);
  fit.lambda_z = wald.z(k + 1);
  fit.lambda_p = wald.p(k + 1);
  if (wald.condition > 1e8) {
    fit.weak_identification = true;
    fit.warnings.push_back(
        "weak identification: Hessian condition number " +
        std::to_string(wald.condition) + " exceeds 1e8");
  }
  if (!wald.ok)
    fit.warnings.push_back("Hessian not positive definite; some standard errors missing");
  return fit;
}

Eigen::VectorXd predict_spatial(const SdemFit& fit, const SpatialDesign& design) {
  if (design.names != fit.names)
    fail(errc::schema_mismatch, "predict_spatial: design does not match fit");
  return design.Z * fit.gamma;
}

Eigen::VectorXd predict_spatial(const ManskiFit& fit, const SpatialDesign& design,
                                const SpatialWeights& W) {
  if (design.names != fit.names)
    fail(errc::schema_mismatch, "predict_spatial: design does not match fit");
  const Eigen::Index n = design.Z.rows();
  const Eigen::MatrixXd B =
      Eigen::MatrixXd::Identity(n, n) - fit.delta * W.dense();
  const Eigen::VectorXd trend = design.Z * fit.gamma;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
  const Eigen::VectorXd pred = lu.solve(trend);
  const double residual = (B * pred - trend).cwiseAbs().maxCoeff();
  if (!(residual < 1e-6))
    fail(errc::numeric, "reduced-form solve residual " + std::to_string(residual));
  return pred;
}

}  // namespace riskgrid
