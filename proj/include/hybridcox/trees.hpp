#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hybridcox/error.hpp"
#include "hybridcox/rng.hpp"

namespace hybridcox {

struct TreeParams {
  int n_trees = 10;
  int min_leaf = 5;
  int max_depth = 30;
  /// Candidate features per split; 0 selects floor(sqrt(p)).
  int features_per_split = 0;
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<int> counts;  // class frequencies of the training rows reaching the node
  int total = 0;

  [[nodiscard]] bool is_leaf() const { return feature < 0; }
};

struct ClassificationTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::uint64_t seed = 0;

  [[nodiscard]] const TreeNode& leaf_for(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf())
      node = &nodes[static_cast<std::size_t>(row(node->feature) <= node->threshold ? node->left : node->right)];
    return *node;
  }

  [[nodiscard]] int n_leaves() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }
};

struct TreeEnsemble {
  std::vector<ClassificationTree> trees;
  TreeParams params;
  int n_classes = 0;
};

namespace detail {

inline double gini(std::span<const int> counts, int total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (int c : counts) {
    const double p = static_cast<double>(c) / total;
    s += p * p;
  }
  return 1.0 - s;
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> y, int n_classes, const TreeParams& params, Rng& rng)
      : x_(x), y_(y), k_(n_classes), params_(params), rng_(rng) {
    const int p = static_cast<int>(x.cols());
    mtry_ = params.features_per_split > 0 ? std::min(params.features_per_split, p)
                                          : std::max(1, static_cast<int>(std::floor(std::sqrt(p))));
  }

  ClassificationTree build(std::vector<std::size_t> rows) {
    ClassificationTree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  int grow(ClassificationTree& tree, std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    {
      TreeNode& node = tree.nodes.back();
      node.counts.assign(static_cast<std::size_t>(k_), 0);
      for (auto r : rows) ++node.counts[static_cast<std::size_t>(y_[r])];
      node.total = static_cast<int>(rows.size());
    }
    const TreeNode snapshot = tree.nodes[static_cast<std::size_t>(id)];
    const int n = snapshot.total;
    const double parent_impurity = gini(snapshot.counts, n);
    if (depth >= params_.max_depth || parent_impurity == 0.0 || n < 2 * params_.min_leaf) return id;

    // Candidate features: a random subset of size mtry.
    std::vector<int> features(static_cast<std::size_t>(x_.cols()));
    std::iota(features.begin(), features.end(), 0);
    for (int j = 0; j < mtry_; ++j) {
      std::uniform_int_distribution<int> pick(j, static_cast<int>(features.size()) - 1);
      std::swap(features[static_cast<std::size_t>(j)], features[static_cast<std::size_t>(pick(rng_))]);
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_decrease = 1e-12;
    std::vector<std::size_t> sorted = rows;
    std::vector<int> left(static_cast<std::size_t>(k_));
    std::vector<int> right(static_cast<std::size_t>(k_));
    for (int j = 0; j < mtry_; ++j) {
      const int f = features[static_cast<std::size_t>(j)];
      std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return x_(static_cast<Eigen::Index>(a), f) < x_(static_cast<Eigen::Index>(b), f);
      });
      std::fill(left.begin(), left.end(), 0);
      right = snapshot.counts;
      for (int i = 0; i + 1 < n; ++i) {
        const auto r = sorted[static_cast<std::size_t>(i)];
        ++left[static_cast<std::size_t>(y_[r])];
        --right[static_cast<std::size_t>(y_[r])];
        const double xv = x_(static_cast<Eigen::Index>(r), f);
        const double xn = x_(static_cast<Eigen::Index>(sorted[static_cast<std::size_t>(i + 1)]), f);
        const int n_left = i + 1;
        const int n_right = n - n_left;
        if (xv == xn || n_left < params_.min_leaf || n_right < params_.min_leaf) continue;
        const double child = (n_left * gini(left, n_left) + n_right * gini(right, n_right)) / n;
        const double decrease = parent_impurity - child;
        if (decrease > best_decrease) {
          best_decrease = decrease;
          best_feature = f;
          best_threshold = 0.5 * (xv + xn);
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> lrows, rrows;
    for (auto r : rows)
      (x_(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? lrows : rrows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(tree, std::move(lrows), depth + 1);
    const int r = grow(tree, std::move(rrows), depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  int k_;
  TreeParams params_;
  Rng& rng_;
  int mtry_ = 1;
};

}  // namespace detail

/// Bagged CART classifiers: each tree is grown on a bootstrap resample with
/// Gini-impurity splits; leaves keep class frequencies.
inline TreeEnsemble fit_trees(const Eigen::MatrixXd& x, std::span<const int> y, int n_classes,
                              const TreeParams& params, Rng& rng) {
  detail::require(x.rows() > 0, "fit_trees: empty training data");
  detail::require(static_cast<Eigen::Index>(y.size()) == x.rows(), "fit_trees: y length mismatch");
  detail::require(params.n_trees >= 1, "fit_trees: n_trees must be >= 1");
  detail::require(params.min_leaf >= 1, "fit_trees: min_leaf must be >= 1");
  detail::require(params.max_depth >= 0, "fit_trees: max_depth must be >= 0");
  detail::require(n_classes >= 1, "fit_trees: need at least one class");
  detail::require(x.cols() > 0, "fit_trees: no predictors");
  for (int v : y) detail::require(v >= 0 && v < n_classes, "fit_trees: class code out of range");

  TreeEnsemble ens;
  ens.params = params;
  ens.n_classes = n_classes;
  const auto n = static_cast<std::size_t>(x.rows());
  for (int t = 0; t < params.n_trees; ++t) {
    const std::uint64_t seed = rng();
    Rng tree_rng(seed);
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(tree_rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    detail::TreeBuilder builder(x, y, n_classes, params, tree_rng);
    ClassificationTree tree = builder.build(std::move(rows));
    tree.seed = seed;
    ens.trees.push_back(std::move(tree));
  }
  return ens;
}

/// Picks a tree uniformly, routes `row` to its leaf, and samples a class
/// with probability proportional to the leaf frequencies.
inline int draw_class(const TreeEnsemble& ens, const Eigen::Ref<const Eigen::RowVectorXd>& row, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick_tree(0, ens.trees.size() - 1);
  const TreeNode& leaf = ens.trees[pick_tree(rng)].leaf_for(row);
  std::uniform_int_distribution<int> pick(0, leaf.total - 1);
  int u = pick(rng);
  for (int k = 0; k < static_cast<int>(leaf.counts.size()); ++k) {
    u -= leaf.counts[static_cast<std::size_t>(k)];
    if (u < 0) return k;
  }
  return static_cast<int>(leaf.counts.size()) - 1;
}

}  // namespace hybridcox
