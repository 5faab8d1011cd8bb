#include "riskgrid/forest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "riskgrid/error.hpp"
#include "riskgrid/parallel.hpp"

namespace riskgrid {

namespace {

double node_mean(const Eigen::VectorXd& y, const std::vector<int>& rows) {
  double s = 0.0;
  for (int r : rows) s += y(r);
  return s / static_cast<double>(rows.size());
}

double node_rss(const Eigen::VectorXd& y, const std::vector<int>& rows,
                double mean) {
  double s = 0.0;
  for (int r : rows) s += (y(r) - mean) * (y(r) - mean);
  return s;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double rss_after = 0.0;
  bool found = false;
};

// Best (feature, midpoint) over the sampled features. Scans each feature in
// sorted order with running sums; only positions leaving min_node rows on
// both sides qualify. Candidates within a 1e-9 relative window count as RSS
// ties and resolve to the lower (feature, threshold): distinct features can
// produce the identical partition, and the running-sum accumulation order
// must not decide between them.
SplitChoice best_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<int>& rows,
                       const std::vector<int>& features, int min_node,
                       double parent_rss) {
  SplitChoice best;
  const double eps = 1e-9 * (parent_rss + 1.0);
  const std::size_t m = rows.size();
  std::vector<int> order(rows);

  for (int f : features) {
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (X(a, f) != X(b, f)) return X(a, f) < X(b, f);
      return a < b;
    });

    double total_sum = 0.0, total_sq = 0.0;
    for (int r : order) {
      total_sum += y(r);
      total_sq += y(r) * y(r);
    }

    double left_sum = 0.0, left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const int r = order[i];
      left_sum += y(r);
      left_sq += y(r) * y(r);
      const std::size_t n_left = i + 1;
      const std::size_t n_right = m - n_left;
      if (X(order[i], f) == X(order[i + 1], f)) continue;  // no boundary here
      if (n_left < static_cast<std::size_t>(min_node) ||
          n_right < static_cast<std::size_t>(min_node))
        continue;
      const double right_sum = total_sum - left_sum;
      const double right_sq = total_sq - left_sq;
      const double rss_left =
          left_sq - left_sum * left_sum / static_cast<double>(n_left);
      const double rss_right =
          right_sq - right_sum * right_sum / static_cast<double>(n_right);
      const double rss_after = rss_left + rss_right;
      const double threshold = (X(order[i], f) + X(order[i + 1], f)) / 2.0;
      // candidates arrive in ascending (feature, threshold) order, so a tie
      // keeps the incumbent
      if (!best.found || rss_after < best.rss_after - eps) {
        best.feature = f;
        best.threshold = threshold;
        best.rss_after = rss_after;
        best.found = true;
      }
    }
  }

  if (best.found && !(best.rss_after < parent_rss - eps)) best.found = false;
  return best;
}

int grow_node(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              std::vector<int>&& rows, int mtry, int min_node, Rng& rng,
              Tree& tree, Eigen::VectorXd* importance) {
  const int node_id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  {
    TreeNode& node = tree.nodes.back();
    node.n = static_cast<int>(rows.size());
    node.prediction = node_mean(y, rows);
    node.rss = node_rss(y, rows, node.prediction);
  }

  const double parent_rss = tree.nodes[node_id].rss;
  if (rows.size() < 2 * static_cast<std::size_t>(min_node) || parent_rss <= 0.0)
    return node_id;

  // sample mtry features without replacement; full set when mtry == p
  const int p = static_cast<int>(X.cols());
  std::vector<int> features(p);
  std::iota(features.begin(), features.end(), 0);
  if (mtry < p) {
    for (int t = 0; t < mtry; ++t) {
      const int j = t + static_cast<int>(rng.below(static_cast<std::uint64_t>(p - t)));
      std::swap(features[t], features[j]);
    }
    features.resize(mtry);
    std::sort(features.begin(), features.end());
  }

  const SplitChoice split = best_split(X, y, rows, features, min_node, parent_rss);
  if (!split.found) return node_id;

  std::vector<int> left_rows, right_rows;
  left_rows.reserve(rows.size());
  right_rows.reserve(rows.size());
  for (int r : rows) {
    (X(r, split.feature) <= split.threshold ? left_rows : right_rows).push_back(r);
  }
  rows.clear();
  rows.shrink_to_fit();

  if (importance)
    (*importance)(split.feature) += parent_rss - split.rss_after;

  const int left = grow_node(X, y, std::move(left_rows), mtry, min_node, rng,
                             tree, importance);
  const int right = grow_node(X, y, std::move(right_rows), mtry, min_node, rng,
                              tree, importance);
  tree.nodes[node_id].feature = split.feature;
  tree.nodes[node_id].threshold = split.threshold;
  tree.nodes[node_id].left = left;
  tree.nodes[node_id].right = right;
  return node_id;
}

}  // namespace

double Tree::predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const {
  int cur = 0;
  while (!nodes[static_cast<std::size_t>(cur)].is_leaf()) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(cur)];
    cur = X(row, nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[static_cast<std::size_t>(cur)].prediction;
}

int Tree::leaf_count() const {
  int c = 0;
  for (const TreeNode& nd : nodes) c += nd.is_leaf() ? 1 : 0;
  return c;
}

Tree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const std::vector<int>& rows, int mtry, int min_node, Rng& rng,
               Eigen::VectorXd* importance) {
  if (rows.empty()) fail(errc::bad_input, "grow_tree: empty row set");
  Tree tree;
  std::vector<int> work(rows);
  grow_node(X, y, std::move(work), mtry, min_node, rng, tree, importance);
  return tree;
}

Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names,
                  const ForestOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (opts.n_trees < 1) fail(errc::bad_input, "fit_forest: B >= 1 required");
  if (n < 2) fail(errc::bad_input, "fit_forest: n >= 2 required");
  if (static_cast<std::size_t>(p) != names.size())
    fail(errc::schema_mismatch, "fit_forest: names/columns mismatch");

  Forest forest;
  forest.options = opts;
  forest.feature_names = names;
  forest.mtry = opts.mtry > 0
                    ? std::min<int>(opts.mtry, static_cast<int>(p))
                    : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
  forest.trees.resize(static_cast<std::size_t>(opts.n_trees));

  std::vector<Eigen::VectorXd> tree_importance(
      static_cast<std::size_t>(opts.n_trees), Eigen::VectorXd::Zero(p));

  parallel_for(forest.trees.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      Rng rng = Rng::stream(opts.seed, t);
      std::vector<int> rows(static_cast<std::size_t>(n));
      if (opts.bootstrap) {
        for (auto& r : rows)
          r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        std::sort(rows.begin(), rows.end());  // fixed summation order in leaves
      } else {
        std::iota(rows.begin(), rows.end(), 0);
      }
      forest.trees[t] = grow_tree(X, y, rows, forest.mtry, opts.min_node, rng,
                                  &tree_importance[t]);
    }
  });

  forest.importance = Eigen::VectorXd::Zero(p);
  for (const auto& imp : tree_importance) forest.importance += imp;
  forest.importance /= static_cast<double>(opts.n_trees);
  return forest;
}

Eigen::VectorXd predict_forest(const Forest& forest, const Eigen::MatrixXd& X,
                               const std::vector<std::string>& names) {
  if (names != forest.feature_names)
    fail(errc::schema_mismatch, "predict_forest: feature names do not match fit");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (const Tree& tree : forest.trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += tree.predict_row(X, i);
  }
  return out / static_cast<double>(forest.trees.size());
}

std::vector<ImportanceEntry> forest_importance(const Forest& forest) {
  std::vector<ImportanceEntry> entries;
  entries.reserve(forest.feature_names.size());
  for (std::size_t j = 0; j < forest.feature_names.size(); ++j) {
    entries.push_back({forest.feature_names[j],
                       forest.importance(static_cast<Eigen::Index>(j)), 0});
  }
  std::sort(entries.begin(), entries.end(),
            [](const ImportanceEntry& a, const ImportanceEntry& b) {
              if (a.importance != b.importance) return a.importance > b.importance;
              return a.feature < b.feature;
            });
  for (std::size_t i = 0; i < entries.size(); ++i)
    entries[i].rank = static_cast<int>(i) + 1;
  return entries;
}

Tree fit_cart(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int min_node) {
  std::vector<int> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(0);  // unused: mtry == p draws no features
  return grow_tree(X, y, rows, static_cast<int>(X.cols()), min_node, rng);
}

namespace {

// leaves and total RSS of the subtree rooted at `id`
void subtree_stats(const Tree& tree, int id, int& leaves, double& rss) {
  const TreeNode& nd = tree.nodes[static_cast<std::size_t>(id)];
  if (nd.is_leaf()) {
    leaves += 1;
    rss += nd.rss;
    return;
  }
  subtree_stats(tree, nd.left, leaves, rss);
  subtree_stats(tree, nd.right, leaves, rss);
}

int copy_subtree(const Tree& src, int id, Tree& dst) {
  const int out = static_cast<int>(dst.nodes.size());
  dst.nodes.push_back(src.nodes[static_cast<std::size_t>(id)]);
  if (!src.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const int l = copy_subtree(src, src.nodes[static_cast<std::size_t>(id)].left, dst);
    const int r = copy_subtree(src, src.nodes[static_cast<std::size_t>(id)].right, dst);
    dst.nodes[static_cast<std::size_t>(out)].left = l;
    dst.nodes[static_cast<std::size_t>(out)].right = r;
  }
  return out;
}

}  // namespace

Tree prune_cart(const Tree& tree, double alpha) {
  if (alpha < 0.0) fail(errc::bad_input, "prune_cart: alpha must be >= 0");
  Tree work = tree;
  // weakest-link: repeatedly collapse the internal node with the smallest
  // g = (rss(node) - rss(subtree)) / (leaves(subtree) - 1) while g <= alpha
  for (;;) {
    int best_node = -1;
    double best_g = 0.0;
    for (std::size_t id = 0; id < work.nodes.size(); ++id) {
      if (work.nodes[id].is_leaf()) continue;
      int leaves = 0;
      double rss = 0.0;
      subtree_stats(work, static_cast<int>(id), leaves, rss);
      const double g = (work.nodes[id].rss - rss) / static_cast<double>(leaves - 1);
      if (best_node < 0 || g < best_g) {
        best_node = static_cast<int>(id);
        best_g = g;
      }
    }
    if (best_node < 0 || best_g > alpha) break;
    TreeNode& nd = work.nodes[static_cast<std::size_t>(best_node)];
    nd.feature = -1;
    nd.left = nd.right = -1;
  }
  // compact: drop unreachable nodes
  Tree out;
  copy_subtree(work, 0, out);
  return out;
}

std::string dump_tree(const Tree& tree, const std::vector<std::string>& names) {
  std::ostringstream os;
  std::function<void(int, int)> walk = [&](int id, int depth) {
    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(id)];
    os << std::string(static_cast<std::size_t>(depth) * 2, ' ');
    if (nd.is_leaf()) {
      os << "leaf n=" << nd.n << " pred=" << nd.prediction << "\n";
    } else {
      os << names[static_cast<std::size_t>(nd.feature)] << " <= " << nd.threshold
         << " (n=" << nd.n << ")\n";
      walk(nd.left, depth + 1);
      walk(nd.right, depth + 1);
    }
  };
  walk(0, 0);
  return os.str();
}

}  // namespace riskgrid
