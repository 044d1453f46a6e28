#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdr/matrix.hpp"

#include "json.hpp"

namespace tdr {

struct FitParams {
  // A split is kept only if it lowers the summed leaf error by at least this
  // much (absolute units of sum-of-squared-deviations).
  double min_error_decrease = 0.01;
  int min_leaf_count = 5;
  int max_depth = 0;  // 0 = unlimited

  void validate() const;
};

// Binary regression tree stored as a flat array; node 0 is the root.
// Internal nodes route x[feature] <= threshold to `left`, else `right`.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prediction = 0.0;  // leaf: mean of routed training targets
    int count = 0;            // leaf: number of routed training rows
    double variance = 0.0;    // leaf: population variance of routed targets

    bool is_leaf() const { return feature < 0; }
  };

  std::vector<Node> nodes;
  int n_features = 0;

  bool empty() const { return nodes.empty(); }
  int leaf_count() const;
  int depth() const;
};

// Sum of squared deviations from the mean, i.e. count * population variance.
// argument_error on empty input.
double node_error(std::span<const double> targets);

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double error_decrease = 0.0;
};

// Exhaustive variance-reduction split search over all features and all
// midpoints between consecutive distinct sorted values. Returns nullopt when
// no candidate leaves both children with >= min_leaf_count rows or the best
// decrease falls below min_error_decrease. Ties break to the lower feature
// index, then the lower threshold. The search canonicalises row order
// internally, so the result is independent of the ordering of `rows`.
std::optional<SplitChoice> best_split(const FeatureMatrix& X,
                                      std::span<const double> y,
                                      std::span<const int> rows,
                                      const FitParams& params);

// Grows a tree depth-first until no admissible split remains. Non-finite
// feature or target values raise data_error naming the row and column.
RegressionTree fit_tree(const FeatureMatrix& X, std::span<const double> y,
                        const FitParams& params);

// Routes x to a leaf. schema_error if x.size() != tree.n_features.
double predict(const RegressionTree& tree, std::span<const double> x);

// Nested JSON encoding, lossless for predictions:
//   {"split": {"f": i, "t": v}, "left": ..., "right": ...}
//   {"leaf": {"p": v, "n": c, "var": v}}
nlohmann::json tree_to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const nlohmann::json& j, int n_features);

}  // namespace tdr
