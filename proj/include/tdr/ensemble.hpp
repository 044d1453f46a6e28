#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tdr/tree.hpp"

namespace tdr {

// Bagged regression trees plus the non-negative combination weights found by
// penalised pruning. Straight after fit_bagged every tree is active with
// alpha = 1/K; select_trees replaces alpha/active with the pruned solution.
struct Ensemble {
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::vector<double> alpha;
  std::vector<int> active;  // ascending tree indices with alpha > 0
  double lambda = 0.0;      // 0 until select_trees has run
  FitParams params;
  int n_features = 0;

  int tree_count() const { return static_cast<int>(trees.size()); }
};

// n iid uniform draws from {0..n-1} with replacement, deterministic per seed.
std::vector<int> bootstrap_indices(int n, std::uint64_t seed);

// Fits K trees on independent bootstrap resamples. Tree k draws its resample
// from derive_seed(master_seed, "tree", k), so the first K trees of a larger
// bag coincide with the K-tree bag for the same master seed.
Ensemble fit_bagged(const FeatureMatrix& X, std::span<const double> y, int k_trees,
                    const FitParams& params, std::uint64_t master_seed,
                    int threads = 1);

// Unweighted mean over the active set (the default combination rule), or the
// alpha-weighted sum when alpha_weighted is set. state_error when no tree is
// active.
double predict_bagged(const Ensemble& e, std::span<const double> x,
                      bool alpha_weighted = false);

struct PruneResult {
  std::vector<double> alpha;
  std::vector<int> active;
  int n_active = 0;
  double objective = 0.0;             // penalised objective at the solution
  double resubstitution_error = 0.0;  // RMSE of the weighted fit on the pruning set
  bool converged = true;
  double final_delta = 0.0;
  int sweeps = 0;
};

// Minimises  (1/N) * sum_n (y_n - sum_k alpha_k f_k(x_n))^2 + beta * sum_k alpha_k
// over alpha >= 0 by cyclic coordinate descent with non-negative
// soft-thresholding. Stops when the largest coordinate change in a sweep
// drops below 1e-8, capped at 1e4 sweeps (non-convergence is reported in the
// result, not thrown). Trees with alpha > 1e-10 form the active set.
PruneResult lasso_prune(const Ensemble& e, const FeatureMatrix& x_val,
                        std::span<const double> y_val, double beta);

// Maps the selection parameter lambda onto the smallest penalty beta whose
// solution satisfies sum_k alpha_k <= 1/lambda (bisection; the l1 norm of the
// solution is non-increasing in beta). Returns a copy of the ensemble with
// alpha/active/lambda filled in. lambda must be > 0.
Ensemble select_trees(const Ensemble& e, const FeatureMatrix& x_val,
                      std::span<const double> y_val, double lambda);

// Shared workspace for repeated pruning of one ensemble against one data set:
// tree predictions and their Gram matrix are computed once.
class EnsemblePruner {
 public:
  EnsemblePruner(const Ensemble& e, const FeatureMatrix& x_val,
                 std::span<const double> y_val);

  PruneResult prune(double beta) const;
  // Upper bound on useful beta values: at or above it the solution is all-zero.
  double beta_ceiling() const;

 private:
  int k_ = 0;
  std::size_t n_ = 0;
  std::vector<double> gram_;  // k x k, (1/N) F^T F
  std::vector<double> corr_;  // k, (1/N) F^T y
  double y_sumsq_over_n_ = 0.0;
};

struct LambdaSweepPoint {
  double lambda = 0.0;  // 1 / sum(alpha); +inf when the solution is all-zero
  double beta = 0.0;
  int n_active = 0;
  double resub_error = 0.0;
};

// Prunes at each beta in ascending order and reports the implied lambda.
std::vector<LambdaSweepPoint> sweep_beta(const Ensemble& e,
                                         const FeatureMatrix& x_val,
                                         std::span<const double> y_val,
                                         std::span<const double> betas);

struct TreeCountCV {
  int k_trees = 0;
  double cv_rmse = 0.0;
};

// k-fold cross-validation of bag size. Rows are shuffled once (deterministic
// per seed) and chunked into `folds` near-equal parts; each fold's model is a
// bag of max(k_grid) trees whose prefixes score the smaller bag sizes.
// argument_error when folds < 2, folds > n, or k_grid is empty.
std::vector<TreeCountCV> cross_validate_treecount(const FeatureMatrix& X,
                                                  std::span<const double> y,
                                                  std::span<const int> k_grid,
                                                  int folds, const FitParams& params,
                                                  std::uint64_t seed, int threads = 1);

// JSON bundle: {"params", "tree_seeds", "alpha", "active", "lambda", "trees"}.
nlohmann::json ensemble_to_json(const Ensemble& e);
Ensemble ensemble_from_json(const nlohmann::json& j);

}  // namespace tdr
