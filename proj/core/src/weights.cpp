#include "riskgrid/weights.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

#include "riskgrid/error.hpp"
#include "riskgrid/parallel.hpp"

namespace riskgrid {

NeighborGraph knn_neighbors(const std::vector<Point>& centroids, int k) {
  const std::size_t n = centroids.size();
  if (k < 1) fail(errc::bad_input, "knn_neighbors requires k >= 1");
  if (n <= static_cast<std::size_t>(k))
    fail(errc::not_enough_cells,
         "need more than k=" + std::to_string(k) + " cells, have " +
             std::to_string(n));

  NeighborGraph g;
  g.k = k;
  g.neighbors.assign(n, {});

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, int>> cand(n - 1);
    for (std::size_t i = begin; i < end; ++i) {
      std::size_t m = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = centroids[j].x - centroids[i].x;
        const double dy = centroids[j].y - centroids[i].y;
        cand[m++] = {dx * dx + dy * dy, static_cast<int>(j)};
      }
      // ties broken by ascending id via the pair's second member
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
      std::vector<int> ids(k);
      for (int t = 0; t < k; ++t) ids[t] = cand[t].second;
      std::sort(ids.begin(), ids.end());
      g.neighbors[i] = std::move(ids);
    }
  });
  return g;
}

double SpatialWeights::s0() const {
  double s = 0.0;
  for (const auto& row : weights) {
    for (double w : row) s += w;
  }
  return s;
}

Eigen::MatrixXd SpatialWeights::dense() const {
  const auto nn = static_cast<Eigen::Index>(n());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(nn, nn);
  for (std::size_t i = 0; i < n(); ++i) {
    for (std::size_t t = 0; t < graph.neighbors[i].size(); ++t) {
      M(static_cast<Eigen::Index>(i), graph.neighbors[i][t]) = weights[i][t];
    }
  }
  return M;
}

SpatialWeights row_standardize(const NeighborGraph& graph) {
  SpatialWeights W;
  W.graph = graph;
  W.weights.resize(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const std::size_t deg = graph.neighbors[i].size();
    if (deg == 0) fail(errc::bad_input, "graph row without neighbors");
    W.weights[i].assign(deg, 1.0 / static_cast<double>(deg));
  }
  return W;
}

Eigen::VectorXd spatial_lag(const SpatialWeights& W, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != W.n())
    fail(errc::schema_mismatch,
         "spatial_lag: vector length " + std::to_string(x.size()) +
             " != n=" + std::to_string(W.n()));
  Eigen::VectorXd out(x.size());
  for (std::size_t i = 0; i < W.n(); ++i) {
    double s = 0.0;
    const auto& ids = W.graph.neighbors[i];
    const auto& ws = W.weights[i];
    for (std::size_t t = 0; t < ids.size(); ++t) s += ws[t] * x(ids[t]);
    out(static_cast<Eigen::Index>(i)) = s;
  }
  return out;
}

double Spectrum::log_det(double rho) const {
  // ln|1 - rho(a+bi)| summed over all eigenvalues; each conjugate pair
  // contributes ln((1-rho a)^2 + (rho b)^2) in total, so halving the squared
  // modulus per eigenvalue keeps the sum real and correct for real ones too.
  double sum = 0.0;
  for (const auto& ev : eigenvalues) {
    const double re = 1.0 - rho * ev.real();
    const double im = rho * ev.imag();
    const double mod2 = re * re + im * im;
    if (mod2 <= 0.0)
      fail(errc::domain, "log-determinant singular at rho=" + std::to_string(rho));
    sum += 0.5 * std::log(mod2);
  }
  return sum;
}

Spectrum spectrum(const SpatialWeights& W) {
  if (W.n() < 2) fail(errc::bad_input, "spectrum requires n >= 2");
  const Eigen::MatrixXd M = W.dense();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(M, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    fail(errc::numeric, "eigensolver failed on the n=" + std::to_string(W.n()) +
                            " weight matrix");

  Spectrum spec;
  spec.eigenvalues.resize(W.n());
  for (std::size_t i = 0; i < W.n(); ++i) {
    spec.eigenvalues[i] = solver.eigenvalues()(static_cast<Eigen::Index>(i));
  }
  std::sort(spec.eigenvalues.begin(), spec.eigenvalues.end(),
            [](const std::complex<double>& a, const std::complex<double>& b) {
              if (a.real() != b.real()) return a.real() < b.real();
              return a.imag() < b.imag();
            });

  // interval endpoints come from the (numerically) real eigenvalues
  const double imag_tol = 1e-8;
  bool any_real = false;
  for (const auto& ev : spec.eigenvalues) {
    if (std::fabs(ev.imag()) > imag_tol) continue;
    if (!any_real) {
      spec.min_real = spec.max_real = ev.real();
      any_real = true;
    } else {
      spec.min_real = std::min(spec.min_real, ev.real());
      spec.max_real = std::max(spec.max_real, ev.real());
    }
  }
  if (!any_real || spec.min_real >= 0.0) {
    // fall back to real parts; row-standardized kNN matrices never get here
    for (const auto& ev : spec.eigenvalues) {
      spec.min_real = std::min(spec.min_real, ev.real());
      spec.max_real = std::max(spec.max_real, ev.real());
    }
  }
  return spec;
}

}  // namespace riskgrid
