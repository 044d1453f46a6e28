#include "tdr/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace tdr {

void FitParams::validate() const {
  if (!(min_error_decrease >= 0.0) || !std::isfinite(min_error_decrease))
    throw argument_error("FitParams: min_error_decrease must be finite and >= 0");
  if (min_leaf_count < 1)
    throw argument_error("FitParams: min_leaf_count must be >= 1");
  if (max_depth < 0)
    throw argument_error("FitParams: max_depth must be >= 0 (0 = unlimited)");
}

int RegressionTree::leaf_count() const {
  int n = 0;
  for (const auto& node : nodes)
    if (node.is_leaf()) ++n;
  return n;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::function<int(int)> walk = [&](int i) -> int {
    const Node& node = nodes[static_cast<std::size_t>(i)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(walk(node.left), walk(node.right));
  };
  return walk(0);
}

namespace {

// Sum of squared deviations over values that are already in canonical
// (ascending) order, so the result does not depend on caller ordering.
double sse_sorted(const std::vector<double>& sorted) {
  // Constant targets must yield exactly zero, not rounding dust.
  if (sorted.front() == sorted.back()) return 0.0;
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mean = sum / static_cast<double>(sorted.size());
  double sse = 0.0;
  for (double v : sorted) {
    const double d = v - mean;
    sse += d * d;
  }
  return sse;
}

struct LeafStats {
  double mean = 0.0;
  double variance = 0.0;
  int count = 0;
};

LeafStats leaf_stats(std::vector<double>&& targets) {
  std::sort(targets.begin(), targets.end());
  LeafStats s;
  s.count = static_cast<int>(targets.size());
  double sum = 0.0;
  for (double v : targets) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double sse = 0.0;
  for (double v : targets) {
    const double d = v - s.mean;
    sse += d * d;
  }
  s.variance = sse / static_cast<double>(s.count);
  return s;
}

}  // namespace

double node_error(std::span<const double> targets) {
  if (targets.empty()) throw argument_error("node_error: empty target list");
  std::vector<double> sorted(targets.begin(), targets.end());
  std::sort(sorted.begin(), sorted.end());
  return sse_sorted(sorted);
}

std::optional<SplitChoice> best_split(const FeatureMatrix& X,
                                      std::span<const double> y,
                                      std::span<const int> rows,
                                      const FitParams& params) {
  params.validate();
  const int n = static_cast<int>(rows.size());
  if (n < 2 * params.min_leaf_count) return std::nullopt;

  std::vector<double> targets;
  targets.reserve(rows.size());
  for (int r : rows) targets.push_back(y[static_cast<std::size_t>(r)]);
  std::sort(targets.begin(), targets.end());
  const double parent_error = sse_sorted(targets);

  SplitChoice best;
  best.error_decrease = -std::numeric_limits<double>::infinity();

  std::vector<std::pair<double, double>> xy(rows.size());
  for (std::size_t f = 0; f < X.cols; ++f) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<std::size_t>(rows[i]);
      xy[i] = {X.at(r, f), y[r]};
    }
    // Sorting by (x, y) makes the prefix sums below a function of the row
    // multiset only, so permuting training rows cannot change the tree.
    std::sort(xy.begin(), xy.end());
    if (xy.front().first == xy.back().first) continue;

    double total_sum = 0.0, total_sumsq = 0.0;
    for (const auto& [xv, yv] : xy) {
      total_sum += yv;
      total_sumsq += yv * yv;
    }

    double left_sum = 0.0, left_sumsq = 0.0;
    for (int i = 1; i < n; ++i) {
      const double yv = xy[static_cast<std::size_t>(i - 1)].second;
      left_sum += yv;
      left_sumsq += yv * yv;
      const double lo = xy[static_cast<std::size_t>(i - 1)].first;
      const double hi = xy[static_cast<std::size_t>(i)].first;
      if (lo == hi) continue;
      if (i < params.min_leaf_count || n - i < params.min_leaf_count) continue;
      const double mid = 0.5 * (lo + hi);
      // Adjacent representable doubles can round the midpoint onto an
      // endpoint, which would misroute rows; such candidates are skipped.
      if (!(lo < mid && mid < hi)) continue;
      const double left_err = left_sumsq - left_sum * left_sum / i;
      const double right_sum = total_sum - left_sum;
      const double right_err =
          (total_sumsq - left_sumsq) - right_sum * right_sum / (n - i);
      const double decrease = parent_error - left_err - right_err;
      if (decrease > best.error_decrease) {
        best.feature = static_cast<int>(f);
        best.threshold = mid;
        best.error_decrease = decrease;
      }
    }
  }

  if (best.feature < 0 || best.error_decrease < params.min_error_decrease)
    return std::nullopt;
  return best;
}

RegressionTree fit_tree(const FeatureMatrix& X, std::span<const double> y,
                        const FitParams& params) {
  params.validate();
  if (X.rows == 0) throw argument_error("fit_tree: empty training set");
  if (y.size() != X.rows)
    throw dimension_error("fit_tree: " + std::to_string(X.rows) + " rows but " +
                          std::to_string(y.size()) + " targets");
  for (std::size_t r = 0; r < X.rows; ++r) {
    for (std::size_t c = 0; c < X.cols; ++c)
      if (!std::isfinite(X.at(r, c)))
        throw data_error("fit_tree: non-finite feature at row " + std::to_string(r) +
                         " column " + std::to_string(c));
    if (!std::isfinite(y[r]))
      throw data_error("fit_tree: non-finite target at row " + std::to_string(r));
  }

  RegressionTree tree;
  tree.n_features = static_cast<int>(X.cols);

  std::function<int(std::vector<int>&&, int)> grow =
      [&](std::vector<int>&& rows, int depth) -> int {
    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    std::optional<SplitChoice> split;
    const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
    if (!depth_capped)
      split = best_split(X, y, rows, params);

    if (!split) {
      std::vector<double> targets;
      targets.reserve(rows.size());
      for (int r : rows) targets.push_back(y[static_cast<std::size_t>(r)]);
      const LeafStats s = leaf_stats(std::move(targets));
      auto& node = tree.nodes[static_cast<std::size_t>(idx)];
      node.prediction = s.mean;
      node.count = s.count;
      node.variance = s.variance;
      return idx;
    }

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (int r : rows) {
      if (X.at(static_cast<std::size_t>(r), static_cast<std::size_t>(split->feature)) <=
          split->threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return idx;
  };

  std::vector<int> all(X.rows);
  std::iota(all.begin(), all.end(), 0);
  grow(std::move(all), 0);
  return tree;
}

double predict(const RegressionTree& tree, std::span<const double> x) {
  if (tree.empty()) throw state_error("predict: tree has no nodes");
  if (static_cast<int>(x.size()) != tree.n_features)
    throw schema_error("predict: row has " + std::to_string(x.size()) +
                       " features, tree expects " + std::to_string(tree.n_features));
  int i = 0;
  while (true) {
    const auto& node = tree.nodes[static_cast<std::size_t>(i)];
    if (node.is_leaf()) return node.prediction;
    i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                    : node.right;
  }
}

namespace {

nlohmann::json node_to_json(const RegressionTree& tree, int i) {
  const auto& node = tree.nodes[static_cast<std::size_t>(i)];
  if (node.is_leaf()) {
    return {{"leaf", {{"p", node.prediction}, {"n", node.count}, {"var", node.variance}}}};
  }
  nlohmann::json j;
  j["split"] = {{"f", node.feature}, {"t", node.threshold}};
  j["left"] = node_to_json(tree, node.left);
  j["right"] = node_to_json(tree, node.right);
  return j;
}

int node_from_json(const nlohmann::json& j, RegressionTree& tree, int n_features) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf")) {
    const auto& leaf = j.at("leaf");
    auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.prediction = leaf.at("p").get<double>();
    node.count = leaf.at("n").get<int>();
    node.variance = leaf.at("var").get<double>();
    return idx;
  }
  if (!j.contains("split") || !j.contains("left") || !j.contains("right"))
    throw schema_error("tree_from_json: node is neither a leaf nor a split");
  const auto& split = j.at("split");
  const int feature = split.at("f").get<int>();
  const double threshold = split.at("t").get<double>();
  if (feature < 0 || feature >= n_features)
    throw schema_error("tree_from_json: split feature " + std::to_string(feature) +
                       " outside schema of " + std::to_string(n_features) + " columns");
  const int left = node_from_json(j.at("left"), tree, n_features);
  const int right = node_from_json(j.at("right"), tree, n_features);
  auto& node = tree.nodes[static_cast<std::size_t>(idx)];
  node.feature = feature;
  node.threshold = threshold;
  node.left = left;
  node.right = right;
  return idx;
}

}  // namespace

nlohmann::json tree_to_json(const RegressionTree& tree) {
  if (tree.empty()) throw state_error("tree_to_json: tree has no nodes");
  return node_to_json(tree, 0);
}

RegressionTree tree_from_json(const nlohmann::json& j, int n_features) {
  RegressionTree tree;
  tree.n_features = n_features;
  try {
    node_from_json(j, tree, n_features);
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(std::string("tree_from_json: ") + e.what());
  }
  return tree;
}

}  // namespace tdr
