#include <algorithm>
#include <cmath>
#include <numeric>

#include "upf/errors.hpp"
#include "upf/ml.hpp"
#include "upf/rng.hpp"

namespace upf::ml {

namespace {

constexpr double kTieTolerance = 1e-12;

struct Entry {
  std::size_t row;
  double weight;
};

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double child_impurity = 0.0;
};

bool better(const SplitCandidate& best, double impurity, int feature, double threshold) {
  if (!best.found) return true;
  if (impurity < best.child_impurity - kTieTolerance) return true;
  if (impurity > best.child_impurity + kTieTolerance) return false;
  if (feature != best.feature) return feature < best.feature;
  return threshold < best.threshold;
}

class Builder {
 public:
  Builder(const Eigen::MatrixXd& X, std::span<const int> y, const TreeOptions& options)
      : X_(X), y_(y), options_(options), rng_(options.seed) {}

  Tree build(std::vector<Entry> entries) {
    Tree tree;
    nodes_ = &tree.nodes;
    grow(std::move(entries), 0);
    return tree;
  }

 private:
  int grow(std::vector<Entry> entries, std::size_t depth) {
    double w0 = 0.0;
    double w1 = 0.0;
    for (const auto& e : entries) (y_[e.row] == 1 ? w1 : w0) += e.weight;
    const int index = static_cast<int>(nodes_->size());
    nodes_->push_back({});
    {
      TreeNode& node = (*nodes_)[static_cast<std::size_t>(index)];
      node.weight = w0 + w1;
      node.impurity = gini_impurity(w0, w1);
      node.prediction = w1 > w0 ? 1 : 0;
    }
    const bool pure = w0 == 0.0 || w1 == 0.0;
    const bool depth_limited = options_.max_depth != 0 && depth >= options_.max_depth;
    if (pure || depth_limited || entries.size() < 2 * options_.min_samples_leaf) return index;

    const SplitCandidate split = best_split(entries, w0 + w1);
    if (!split.found) return index;

    std::vector<Entry> left;
    std::vector<Entry> right;
    for (const auto& e : entries) {
      const double x = X_(static_cast<Eigen::Index>(e.row), split.feature);
      (x <= split.threshold ? left : right).push_back(e);
    }
    entries.clear();
    entries.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    TreeNode& node = (*nodes_)[static_cast<std::size_t>(index)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  std::vector<int> feature_order() {
    std::vector<int> order(static_cast<std::size_t>(X_.cols()));
    std::iota(order.begin(), order.end(), 0);
    if (options_.max_features != 0 && options_.max_features < order.size()) rng_.shuffle(order);
    return order;
  }

  SplitCandidate best_split(const std::vector<Entry>& entries, double total_weight) {
    const std::size_t budget = options_.max_features == 0
                                   ? static_cast<std::size_t>(X_.cols())
                                   : std::min<std::size_t>(options_.max_features,
                                                           static_cast<std::size_t>(X_.cols()));
    SplitCandidate best;
    std::size_t examined = 0;
    std::vector<std::pair<double, std::size_t>> sorted(entries.size());
    for (int f : feature_order()) {
      if (examined >= budget) break;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        sorted[i] = {X_(static_cast<Eigen::Index>(entries[i].row), f), i};
      }
      std::sort(sorted.begin(), sorted.end());
      if (sorted.front().first == sorted.back().first) continue;  // constant in this node
      ++examined;

      double lw0 = 0.0;
      double lw1 = 0.0;
      double tw0 = 0.0;
      double tw1 = 0.0;
      for (const auto& e : entries) (y_[e.row] == 1 ? tw1 : tw0) += e.weight;
      const std::size_t min_leaf = options_.min_samples_leaf;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const Entry& e = entries[sorted[i].second];
        (y_[e.row] == 1 ? lw1 : lw0) += e.weight;
        const double xa = sorted[i].first;
        const double xb = sorted[i + 1].first;
        if (xa == xb) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf || sorted.size() - n_left < min_leaf) continue;
        const double wl = lw0 + lw1;
        const double wr = (tw0 - lw0) + (tw1 - lw1);
        const double child =
            (wl * gini_impurity(lw0, lw1) + wr * gini_impurity(tw0 - lw0, tw1 - lw1)) /
            total_weight;
        double threshold = xa + (xb - xa) / 2.0;
        if (!(threshold < xb)) threshold = xa;
        if (better(best, child, f, threshold)) best = {true, f, threshold, child};
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  std::span<const int> y_;
  TreeOptions options_;
  Rng rng_;
  std::vector<TreeNode>* nodes_ = nullptr;
};

}  // namespace

double gini_impurity(double w0, double w1) {
  const double total = w0 + w1;
  if (total <= 0.0) return 0.0;
  const double p0 = w0 / total;
  const double p1 = w1 / total;
  return 1.0 - (p0 * p0 + p1 * p1);
}

int Tree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<std::size_t>(x(nodes[i].feature) <= nodes[i].threshold ? nodes[i].left
                                                                            : nodes[i].right);
  }
  return nodes[i].prediction;
}

std::size_t Tree::depth() const {
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  std::size_t deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (nodes[i].feature >= 0) {
      stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
    }
  }
  return deepest;
}

Tree grow_tree(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const std::size_t> rows,
               std::span<const double> weights, const TreeOptions& options) {
  if (rows.empty()) throw InvariantError("cannot grow a tree on zero rows");
  if (!weights.empty() && weights.size() != rows.size()) {
    throw InvariantError("tree weights must parallel the selected rows");
  }
  if (options.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  std::vector<Entry> entries;
  entries.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    entries.push_back({rows[i], weights.empty() ? 1.0 : weights[i]});
  }
  Builder builder(X, y, options);
  return builder.build(std::move(entries));
}

}  // namespace upf::ml
