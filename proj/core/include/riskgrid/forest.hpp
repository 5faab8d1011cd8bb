#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "riskgrid/rng.hpp"

namespace riskgrid {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double prediction = 0.0;  // mean of the training responses routed here
  int n = 0;
  double rss = 0.0;  // residual sum of squares of the node's rows
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // root at index 0
  double predict_row(const Eigen::MatrixXd& X, Eigen::Index row) const;
  int leaf_count() const;
};

struct ForestOptions {
  int n_trees = 500;
  int mtry = 0;  // 0 -> ceil(sqrt(p))
  int min_node = 5;
  std::uint64_t seed = 0;
  bool bootstrap = true;  // diagnostic flag; off reproduces deterministic CART
};

struct Forest {
  std::vector<Tree> trees;
  ForestOptions options;
  int mtry = 0;  // resolved value
  Eigen::VectorXd importance;  // mean RSS decrease per feature over the trees
  std::vector<std::string> feature_names;
};

// Recursive binary splitting minimizing left+right RSS over midpoints of
// consecutive distinct sorted values; m features drawn without replacement at
// each node. Splitting stops when a node has fewer than 2*min_node rows, is
// pure, or no split reduces the RSS. RSS ties (within a 1e-9 relative window,
// so distinct features inducing the identical partition always tie) break on
// (lower feature index, lower threshold).
Tree grow_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const std::vector<int>& rows, int mtry, int min_node, Rng& rng,
               Eigen::VectorXd* importance = nullptr);

Forest fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<std::string>& names,
                  const ForestOptions& opts = {});

Eigen::VectorXd predict_forest(const Forest& forest, const Eigen::MatrixXd& X,
                               const std::vector<std::string>& names);

struct ImportanceEntry {
  std::string feature;
  double importance = 0.0;
  int rank = 0;
};

// descending by importance, ties by name
std::vector<ImportanceEntry> forest_importance(const Forest& forest);

// Deterministic single CART tree: m = p, no bootstrap. Diagnostic companion
// to the forest and the target of the exhaustive-split oracle tests.
Tree fit_cart(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int min_node);

// Weakest-link cost-complexity pruning: collapses internal nodes while the
// per-leaf RSS increase is at most alpha, minimizing RSS + alpha * |leaves|.
Tree prune_cart(const Tree& tree, double alpha);

std::string dump_tree(const Tree& tree, const std::vector<std::string>& names);

}  // namespace riskgrid
