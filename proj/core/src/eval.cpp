#include "riskgrid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "riskgrid/error.hpp"
#include "riskgrid/parallel.hpp"
#include "riskgrid/rng.hpp"

namespace riskgrid {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const char* who) {
  if (a.size() != b.size())
    fail(errc::schema_mismatch, std::string(who) + ": length mismatch");
  if (a.size() == 0) fail(errc::bad_input, std::string(who) + ": empty input");
}

}  // namespace

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::Poisson: return "poisson";
    case ModelKind::Forest: return "forest";
  }
  return "unknown";
}

double mape(const Eigen::VectorXd& actual, const Eigen::VectorXd& forecast,
            std::size_t* n_skipped) {
  check_lengths(actual, forecast, "mape");
  double sum = 0.0;
  std::size_t used = 0, skipped = 0;
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    if (actual(i) == 0.0) {
      ++skipped;
      continue;
    }
    sum += std::fabs((actual(i) - forecast(i)) / actual(i));
    ++used;
  }
  if (n_skipped) *n_skipped = skipped;
  if (used == 0)
    fail(errc::undefined_metric, "mape undefined: every actual value is zero");
  return sum / static_cast<double>(used) * 100.0;
}

double mae(const Eigen::VectorXd& actual, const Eigen::VectorXd& forecast) {
  check_lengths(actual, forecast, "mae");
  return (actual - forecast).cwiseAbs().mean();
}

double rmse(const Eigen::VectorXd& actual, const Eigen::VectorXd& forecast) {
  check_lengths(actual, forecast, "rmse");
  return std::sqrt((forecast - actual).squaredNorm() /
                   static_cast<double>(actual.size()));
}

double r_squared(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted) {
  check_lengths(actual, predicted, "r_squared");
  const double mean = actual.mean();
  const double sst = (actual.array() - mean).square().sum();
  if (sst <= 0.0)
    fail(errc::undefined_metric, "r_squared undefined: actuals have zero variance");
  const double sse = (actual - predicted).squaredNorm();
  return 1.0 - sse / sst;
}

double log_deviance(const Eigen::VectorXd& actual, const Eigen::VectorXd& rate,
                    std::vector<std::string>* warnings) {
  check_lengths(actual, rate, "log_deviance");
  double sum = 0.0;
  bool clamped = false;
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    const double y = actual(i);
    if (y < 0.0 || y != std::floor(y))
      fail(errc::bad_input, "log_deviance: actuals must be non-negative integers");
    double mu = rate(i);
    if (!(mu > 0.0)) {
      mu = 1e-10;
      clamped = true;
    }
    sum += mu - y * std::log(mu) + std::lgamma(y + 1.0);
  }
  if (clamped && warnings)
    warnings->push_back("log_deviance: non-positive rates clamped to 1e-10");
  return sum / static_cast<double>(actual.size());
}

MetricSet compute_metrics(const Eigen::VectorXd& actual,
                          const Eigen::VectorXd& forecast,
                          std::vector<std::string>* warnings) {
  MetricSet m;
  m.n_used = static_cast<std::size_t>(actual.size());
  try {
    m.mape = mape(actual, forecast, &m.n_skipped_mape);
  } catch (const Error&) {
    m.mape = kNaN;
  }
  m.mae = mae(actual, forecast);
  m.rmse = rmse(actual, forecast);
  try {
    m.r2 = r_squared(actual, forecast);
  } catch (const Error&) {
    m.r2 = kNaN;
  }
  m.log_dev = log_deviance(actual, forecast, warnings);
  return m;
}

std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) fail(errc::bad_input, "make_folds: k >= 2 required");
  if (n < static_cast<std::size_t>(k))
    fail(errc::bad_input, "make_folds: k exceeds n");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> fold(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  return fold;
}

std::vector<int> make_spatial_folds(const std::vector<Point>& centroids, int k) {
  if (k < 2) fail(errc::bad_input, "make_spatial_folds: k >= 2 required");
  const std::size_t n = centroids.size();
  if (n < static_cast<std::size_t>(k))
    fail(errc::bad_input, "make_spatial_folds: k exceeds n");
  // rank cells by centroid x (ties by id), deal contiguous blocks
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (centroids[a].x != centroids[b].x) return centroids[a].x < centroids[b].x;
    return a < b;
  });
  std::vector<int> fold(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    fold[order[i]] = static_cast<int>(
        std::min<std::size_t>(i * static_cast<std::size_t>(k) / n,
                              static_cast<std::size_t>(k - 1)));
  }
  return fold;
}

std::vector<int> make_spatial_folds(const Fishnet& net, int k) {
  return make_spatial_folds(net.centroids(), k);
}

namespace {

MetricSet nan_metrics() {
  MetricSet m;
  m.mape = m.mae = m.rmse = m.r2 = m.log_dev = kNaN;
  return m;
}

// per-metric mean/sd across folds ignoring NaNs
void summarize(const std::vector<MetricSet>& folds, MetricSet& mean,
               MetricSet& sd) {
  auto reduce = [&](auto member) {
    std::vector<double> vals;
    for (const auto& f : folds) {
      const double v = f.*member;
      if (std::isfinite(v)) vals.push_back(v);
    }
    double m = kNaN, s = kNaN;
    if (!vals.empty()) {
      m = 0.0;
      for (double v : vals) m += v;
      m /= static_cast<double>(vals.size());
    }
    if (vals.size() >= 2) {
      s = 0.0;
      for (double v : vals) s += (v - m) * (v - m);
      s = std::sqrt(s / static_cast<double>(vals.size() - 1));
    }
    return std::pair<double, double>(m, s);
  };
  std::tie(mean.mape, sd.mape) = reduce(&MetricSet::mape);
  std::tie(mean.mae, sd.mae) = reduce(&MetricSet::mae);
  std::tie(mean.rmse, sd.rmse) = reduce(&MetricSet::rmse);
  std::tie(mean.r2, sd.r2) = reduce(&MetricSet::r2);
  std::tie(mean.log_dev, sd.log_dev) = reduce(&MetricSet::log_dev);
}

}  // namespace

CvReport cross_validate(ModelKind model, const FeatureMatrix& data,
                        const CvOptions& opts) {
  const std::size_t n = data.n;
  CvReport report;
  report.folds = opts.folds;
  report.seed = opts.seed;

  const std::vector<int> fold =
      opts.fold_override ? *opts.fold_override : make_folds(n, opts.folds, opts.seed);
  if (fold.size() != n)
    fail(errc::bad_input, "cross_validate: fold assignment length mismatch");

  // every cell sits in exactly one fold; training sets exclude it by design
  std::vector<std::size_t> fold_sizes(static_cast<std::size_t>(opts.folds), 0);
  for (int f : fold) {
    if (f < 0 || f >= opts.folds)
      fail(errc::bad_input, "cross_validate: fold id out of range");
    ++fold_sizes[static_cast<std::size_t>(f)];
  }
  std::size_t total = 0;
  for (std::size_t s : fold_sizes) total += s;
  report.leak_checked = total == n;

  const Eigen::MatrixXd X = data.matrix();
  const Eigen::VectorXd y = data.response_vector();

  // folds train in parallel into per-fold slots; metrics and notes are
  // reduced sequentially afterwards so the report is order-stable
  const std::size_t n_folds = static_cast<std::size_t>(opts.folds);
  report.fold_metrics.assign(n_folds, nan_metrics());
  std::vector<std::vector<std::string>> fold_notes(n_folds);

  parallel_for(n_folds, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      std::vector<int> train, test;
      for (std::size_t i = 0; i < n; ++i) {
        (fold[i] == static_cast<int>(f) ? test : train).push_back(static_cast<int>(i));
      }
      if (test.empty() || train.empty()) {
        fold_notes[f].push_back("fold " + std::to_string(f) + ": empty side, skipped");
        continue;
      }
      Eigen::MatrixXd Xtr(train.size(), X.cols()), Xte(test.size(), X.cols());
      Eigen::VectorXd ytr(train.size()), yte(test.size());
      for (std::size_t i = 0; i < train.size(); ++i) {
        Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
        ytr(static_cast<Eigen::Index>(i)) = y(train[i]);
      }
      for (std::size_t i = 0; i < test.size(); ++i) {
        Xte.row(static_cast<Eigen::Index>(i)) = X.row(test[i]);
        yte(static_cast<Eigen::Index>(i)) = y(test[i]);
      }

      try {
        Eigen::VectorXd pred;
        if (model == ModelKind::Poisson) {
          const PoissonFit fit = fit_poisson(Xtr, ytr, data.names);
          pred = predict_poisson(fit, Xte, data.names);
        } else {
          ForestOptions fopts = opts.forest;
          fopts.seed = Rng::stream(opts.forest.seed, f).next();
          const Forest forest = fit_forest(Xtr, ytr, data.names, fopts);
          pred = predict_forest(forest, Xte, data.names);
        }
        MetricSet m = compute_metrics(yte, pred, nullptr);
        if (!std::isfinite(m.r2))
          fold_notes[f].push_back("fold " + std::to_string(f) +
                                  ": zero response variance, r2 reported NA");
        report.fold_metrics[f] = m;
      } catch (const Error& e) {
        fold_notes[f].push_back("fold " + std::to_string(f) + ": " + e.what());
      }
    }
  });

  for (const auto& notes : fold_notes)
    report.notes.insert(report.notes.end(), notes.begin(), notes.end());

  summarize(report.fold_metrics, report.mean, report.sd);
  return report;
}

namespace {

std::vector<RankedFeature> ranked_from_pvalues(
    const std::vector<std::string>& terms, const Eigen::VectorXd& p) {
  std::vector<RankedFeature> out;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j] == "(Intercept)") continue;
    const double pv = p(static_cast<Eigen::Index>(j));
    const double score =
        std::isfinite(pv) ? -std::log10(std::max(pv, 1e-300)) : kNaN;
    out.push_back({terms[j], score});
  }
  std::sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) {
    const bool fa = std::isfinite(a.score), fb = std::isfinite(b.score);
    if (fa != fb) return fa;  // NaN scores sink to the bottom
    if (a.score != b.score) return a.score > b.score;
    return a.feature < b.feature;
  });
  return out;
}

}  // namespace

ImportanceTable importance_table(const PoissonFit* poisson, const Forest* forest,
                                 const SdemFit* sdem, const ManskiFit* manski,
                                 std::size_t k) {
  ImportanceTable table;

  auto add = [&](const std::string& model, std::vector<RankedFeature> ranking) {
    if (ranking.size() > k) ranking.resize(k);
    table.models.push_back(model);
    table.rankings.push_back(std::move(ranking));
  };

  if (poisson) add("poisson", ranked_from_pvalues(poisson->terms, poisson->p));
  if (forest) {
    std::vector<RankedFeature> out;
    for (const auto& e : forest_importance(*forest))
      out.push_back({e.feature, e.importance});
    add("forest", std::move(out));
  }
  if (sdem) add("sdem", ranked_from_pvalues(sdem->names, sdem->p));
  if (manski) add("manski", ranked_from_pvalues(manski->names, manski->p));

  if (!table.rankings.empty()) {
    std::set<std::string> common;
    for (const auto& rf : table.rankings.front()) common.insert(rf.feature);
    for (std::size_t m = 1; m < table.rankings.size(); ++m) {
      std::set<std::string> next;
      for (const auto& rf : table.rankings[m]) {
        if (common.count(rf.feature)) next.insert(rf.feature);
      }
      common.swap(next);
    }
    table.common.assign(common.begin(), common.end());
  }
  return table;
}

}  // namespace riskgrid
