#include "riskgrid/autocorr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "riskgrid/error.hpp"
#include "riskgrid/parallel.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/stats.hpp"

namespace riskgrid {

const char* to_string(Alternative a) {
  switch (a) {
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
    case Alternative::TwoSided: return "two-sided";
  }
  return "unknown";
}

const char* to_string(ClusterLabel label) {
  switch (label) {
    case ClusterLabel::HighHigh: return "HighHigh";
    case ClusterLabel::LowLow: return "LowLow";
    case ClusterLabel::HighLow: return "HighLow";
    case ClusterLabel::LowHigh: return "LowHigh";
    case ClusterLabel::NotSignificant: return "NotSignificant";
  }
  return "unknown";
}

namespace {

void check_variance(const Eigen::VectorXd& y) {
  const double m = y.mean();
  double ss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) ss += (y(i) - m) * (y(i) - m);
  if (ss <= 0.0)
    fail(errc::zero_variance, "Moran's I undefined for a constant vector");
}

// I for a permuted assignment of z values to cells; z already centered,
// denom = sum z^2. perm[i] is the index of the z value placed at cell i.
double moran_of_permutation(const std::vector<double>& z,
                            const std::vector<int>& perm,
                            const SpatialWeights& W, double n_over_s0,
                            double denom) {
  double num = 0.0;
  for (std::size_t i = 0; i < W.n(); ++i) {
    const auto& ids = W.graph.neighbors[i];
    const auto& ws = W.weights[i];
    double lag = 0.0;
    for (std::size_t t = 0; t < ids.size(); ++t)
      lag += ws[t] * z[static_cast<std::size_t>(perm[ids[t]])];
    num += z[static_cast<std::size_t>(perm[i])] * lag;
  }
  return n_over_s0 * num / denom;
}

}  // namespace

double global_moran(const Eigen::VectorXd& y, const SpatialWeights& W) {
  if (static_cast<std::size_t>(y.size()) != W.n())
    fail(errc::schema_mismatch, "global_moran: length(y) != n");
  if (y.size() < 3) fail(errc::bad_input, "global_moran requires n >= 3");
  check_variance(y);

  const double n = static_cast<double>(y.size());
  const Eigen::VectorXd z = y.array() - y.mean();
  const Eigen::VectorXd lag = spatial_lag(W, z);
  const double denom = z.squaredNorm();
  return (n / W.s0()) * z.dot(lag) / denom;
}

GlobalMoranResult moran_permutation_test(const Eigen::VectorXd& y,
                                         const SpatialWeights& W, int n_sims,
                                         std::uint64_t seed,
                                         Alternative alternative) {
  if (n_sims < 99) fail(errc::bad_input, "moran_permutation_test needs n_sims >= 99");
  const double observed = global_moran(y, W);  // validates inputs

  const std::size_t n = W.n();
  std::vector<double> z(n);
  const double mean = y.mean();
  for (std::size_t i = 0; i < n; ++i) z[i] = y(static_cast<Eigen::Index>(i)) - mean;
  double denom = 0.0;
  for (double v : z) denom += v * v;
  const double n_over_s0 = static_cast<double>(n) / W.s0();

  // one stream per replicate; results land in per-replicate slots and the
  // extreme count is reduced sequentially afterwards
  std::vector<double> sims(static_cast<std::size_t>(n_sims));
  parallel_for(sims.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<int> perm(n);
    for (std::size_t r = begin; r < end; ++r) {
      Rng rng = Rng::stream(seed, r);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(perm[i - 1], perm[j]);
      }
      sims[r] = moran_of_permutation(z, perm, W, n_over_s0, denom);
    }
  });

  int greater = 0, less = 0;
  for (double s : sims) {
    if (s >= observed) ++greater;
    if (s <= observed) ++less;
  }
  const double denom_p = static_cast<double>(n_sims + 1);
  double pseudo_p = 1.0;
  switch (alternative) {
    case Alternative::Greater:
      pseudo_p = (greater + 1) / denom_p;
      break;
    case Alternative::Less:
      pseudo_p = (less + 1) / denom_p;
      break;
    case Alternative::TwoSided:
      pseudo_p = std::min(1.0, 2.0 * std::min((greater + 1) / denom_p,
                                              (less + 1) / denom_p));
      break;
  }

  GlobalMoranResult res;
  res.I = observed;
  res.expected = -1.0 / (static_cast<double>(n) - 1.0);
  res.pseudo_p = pseudo_p;
  res.n_sims = n_sims;
  res.seed = seed;
  res.alternative = alternative;
  return res;
}

LocalMoranResult local_moran(const Eigen::VectorXd& y, const SpatialWeights& W,
                             const LocalMoranOptions& opts) {
  if (static_cast<std::size_t>(y.size()) != W.n())
    fail(errc::schema_mismatch, "local_moran: length(y) != n");
  if (y.size() < 3) fail(errc::bad_input, "local_moran requires n >= 3");
  check_variance(y);

  const std::size_t n = W.n();
  const double dn = static_cast<double>(n);
  LocalMoranResult res;
  res.deviation = y.array() - y.mean();
  res.lag_deviation = spatial_lag(W, res.deviation);

  const double m2 = res.deviation.squaredNorm() / dn;
  res.local_i = res.deviation.cwiseProduct(res.lag_deviation) / m2;

  res.z_scores.setConstant(static_cast<Eigen::Index>(n),
                           std::numeric_limits<double>::quiet_NaN());
  res.p.resize(static_cast<Eigen::Index>(n));

  if (!opts.permutation) {
    // randomization moments: E[I_i] = -w_i./(n-1) and the matching variance,
    // with b2 the sample kurtosis m4/m2^2
    double m4 = 0.0;
    for (Eigen::Index i = 0; i < res.deviation.size(); ++i)
      m4 += std::pow(res.deviation(i), 4);
    m4 /= dn;
    const double b2 = m4 / (m2 * m2);

    for (std::size_t i = 0; i < n; ++i) {
      const auto& ws = W.weights[i];
      double wi = 0.0, wi2 = 0.0;
      for (double w : ws) {
        wi += w;
        wi2 += w * w;
      }
      const double e_i = -wi / (dn - 1.0);
      const double var_i = wi2 * (dn - b2) / (dn - 1.0) +
                           (wi * wi - wi2) * (2.0 * b2 - dn) /
                               ((dn - 1.0) * (dn - 2.0)) -
                           e_i * e_i;
      const auto idx = static_cast<Eigen::Index>(i);
      if (var_i <= 0.0) {
        res.z_scores(idx) = 0.0;
        res.p(idx) = 1.0;
        continue;
      }
      res.z_scores(idx) = (res.local_i(idx) - e_i) / std::sqrt(var_i);
      res.p(idx) = stats::two_sided_p(res.z_scores(idx));
    }
  } else {
    // conditional permutation: hold z_i fixed, resample its neighbors from
    // the remaining n-1 values without replacement
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = res.deviation(static_cast<Eigen::Index>(i));
    std::vector<double> pvals(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      std::vector<double> others(n - 1);
      for (std::size_t i = begin; i < end; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) others[m++] = z[j];
        const std::size_t deg = W.graph.neighbors[i].size();
        const double zi_over_m2 = z[i] / m2;
        const double observed = res.local_i(static_cast<Eigen::Index>(i));
        Rng rng = Rng::stream(opts.seed, i);
        int greater = 0, less = 0;
        for (int s = 0; s < opts.n_sims; ++s) {
          // partial Fisher-Yates: the first deg entries become the sample
          for (std::size_t t = 0; t < deg; ++t) {
            const std::size_t j =
                t + static_cast<std::size_t>(rng.below(others.size() - t));
            std::swap(others[t], others[j]);
          }
          double lag = 0.0;
          for (std::size_t t = 0; t < deg; ++t)
            lag += W.weights[i][t] * others[t];
          const double sim = zi_over_m2 * lag;
          if (sim >= observed) ++greater;
          if (sim <= observed) ++less;
        }
        const double dp = static_cast<double>(opts.n_sims + 1);
        pvals[i] = std::min(
            1.0, 2.0 * std::min((greater + 1) / dp, (less + 1) / dp));
      }
    });
    for (std::size_t i = 0; i < n; ++i) res.p(static_cast<Eigen::Index>(i)) = pvals[i];
  }

  res.p_adj = res.p;
  res.labels.assign(n, ClusterLabel::NotSignificant);
  return res;
}

Eigen::VectorXd bonferroni_adjust(const Eigen::VectorXd& p, std::size_t m) {
  return bonferroni_adjust(p, std::vector<std::size_t>(p.size(), m));
}

Eigen::VectorXd bonferroni_adjust(const Eigen::VectorXd& p,
                                  const std::vector<std::size_t>& m) {
  if (static_cast<std::size_t>(p.size()) != m.size())
    fail(errc::schema_mismatch, "bonferroni_adjust: length mismatch");
  Eigen::VectorXd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p(i) >= 0.0 && p(i) <= 1.0))
      fail(errc::bad_input, "p-value outside [0,1]");
    if (m[static_cast<std::size_t>(i)] < 1)
      fail(errc::bad_input, "bonferroni multiplier must be >= 1");
    out(i) = std::min(1.0, static_cast<double>(m[static_cast<std::size_t>(i)]) * p(i));
  }
  return out;
}

std::vector<ClusterLabel> classify_clusters(LocalMoranResult& result,
                                            double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(errc::bad_input, "alpha must be in (0,1)");
  const std::size_t n = static_cast<std::size_t>(result.local_i.size());
  result.labels.assign(n, ClusterLabel::NotSignificant);
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    if (result.p_adj(idx) >= alpha) continue;
    const bool high = result.deviation(idx) > 0.0;
    const bool lag_high = result.lag_deviation(idx) > 0.0;
    result.labels[i] = high ? (lag_high ? ClusterLabel::HighHigh
                                        : ClusterLabel::HighLow)
                            : (lag_high ? ClusterLabel::LowHigh
                                        : ClusterLabel::LowLow);
  }
  return result.labels;
}

}  // namespace riskgrid
