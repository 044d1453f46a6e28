#include "tdr/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tdr/parallel.hpp"
#include "tdr/rng.hpp"

namespace tdr {

std::vector<int> bootstrap_indices(int n, std::uint64_t seed) {
  if (n <= 0) throw argument_error("bootstrap_indices: n must be positive");
  SplitMix64 rng(seed);
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  return idx;
}

Ensemble fit_bagged(const FeatureMatrix& X, std::span<const double> y, int k_trees,
                    const FitParams& params, std::uint64_t master_seed, int threads) {
  params.validate();
  if (k_trees < 1) throw argument_error("fit_bagged: need at least one tree");
  if (X.rows == 0) throw argument_error("fit_bagged: empty training set");
  if (y.size() != X.rows)
    throw dimension_error("fit_bagged: row/target count mismatch");

  Ensemble e;
  e.params = params;
  e.n_features = static_cast<int>(X.cols);
  e.trees.resize(static_cast<std::size_t>(k_trees));
  e.tree_seeds.resize(static_cast<std::size_t>(k_trees));
  for (int k = 0; k < k_trees; ++k)
    e.tree_seeds[static_cast<std::size_t>(k)] =
        derive_seed(master_seed, "tree", static_cast<std::uint64_t>(k));

  parallel_for(k_trees, threads, [&](int k) {
    const auto seed = e.tree_seeds[static_cast<std::size_t>(k)];
    const auto draw = bootstrap_indices(static_cast<int>(X.rows), seed);
    FeatureMatrix xb(X.rows, X.cols);
    std::vector<double> yb(X.rows);
    for (std::size_t i = 0; i < draw.size(); ++i) {
      const auto src = static_cast<std::size_t>(draw[i]);
      std::copy_n(X.values.begin() + static_cast<std::ptrdiff_t>(src * X.cols),
                  X.cols, xb.values.begin() + static_cast<std::ptrdiff_t>(i * X.cols));
      yb[i] = y[src];
    }
    e.trees[static_cast<std::size_t>(k)] = fit_tree(xb, yb, params);
  });

  e.alpha.assign(static_cast<std::size_t>(k_trees), 1.0 / k_trees);
  e.active.resize(static_cast<std::size_t>(k_trees));
  std::iota(e.active.begin(), e.active.end(), 0);
  e.lambda = 0.0;
  return e;
}

double predict_bagged(const Ensemble& e, std::span<const double> x,
                      bool alpha_weighted) {
  if (e.active.empty())
    throw state_error("predict_bagged: ensemble has no active trees");
  double s = 0.0;
  for (int k : e.active) {
    const double p = predict(e.trees[static_cast<std::size_t>(k)], x);
    s += alpha_weighted ? e.alpha[static_cast<std::size_t>(k)] * p : p;
  }
  return alpha_weighted ? s : s / static_cast<double>(e.active.size());
}

namespace {

constexpr double kActiveThreshold = 1e-10;
constexpr double kSweepTolerance = 1e-8;
constexpr int kMaxSweeps = 10000;

}  // namespace

EnsemblePruner::EnsemblePruner(const Ensemble& e, const FeatureMatrix& x_val,
                               std::span<const double> y_val) {
  if (e.trees.empty()) throw state_error("EnsemblePruner: ensemble has no trees");
  if (x_val.rows == 0) throw argument_error("EnsemblePruner: empty validation set");
  if (y_val.size() != x_val.rows)
    throw dimension_error("EnsemblePruner: row/target count mismatch");
  if (static_cast<int>(x_val.cols) != e.n_features)
    throw schema_error("EnsemblePruner: validation rows have " +
                       std::to_string(x_val.cols) + " features, ensemble expects " +
                       std::to_string(e.n_features));

  k_ = e.tree_count();
  n_ = x_val.rows;
  const auto kk = static_cast<std::size_t>(k_);

  // Predictions F (n x k), column-major by tree.
  std::vector<double> preds(n_ * kk);
  for (std::size_t k = 0; k < kk; ++k)
    for (std::size_t i = 0; i < n_; ++i)
      preds[k * n_ + i] = predict(e.trees[k], x_val.row(i));

  const double inv_n = 1.0 / static_cast<double>(n_);
  gram_.assign(kk * kk, 0.0);
  corr_.assign(kk, 0.0);
  for (std::size_t a = 0; a < kk; ++a) {
    const double* fa = preds.data() + a * n_;
    for (std::size_t b = a; b < kk; ++b) {
      const double* fb = preds.data() + b * n_;
      double s = 0.0;
      for (std::size_t i = 0; i < n_; ++i) s += fa[i] * fb[i];
      gram_[a * kk + b] = gram_[b * kk + a] = s * inv_n;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += fa[i] * y_val[i];
    corr_[a] = s * inv_n;
  }
  double ssq = 0.0;
  for (std::size_t i = 0; i < n_; ++i) ssq += y_val[i] * y_val[i];
  y_sumsq_over_n_ = ssq * inv_n;
}

double EnsemblePruner::beta_ceiling() const {
  // At alpha = 0 the stationarity condition is -2 corr_k + beta >= 0 for all
  // k, so any beta at or above 2 * max(corr) keeps the solution empty.
  double m = 0.0;
  for (double c : corr_) m = std::max(m, c);
  return 2.0 * m;
}

PruneResult EnsemblePruner::prune(double beta) const {
  if (beta < 0.0 || !std::isfinite(beta))
    throw argument_error("lasso_prune: beta must be finite and >= 0");
  const auto kk = static_cast<std::size_t>(k_);
  std::vector<double> alpha(kk, 0.0);
  std::vector<double> g(kk, 0.0);  // running G * alpha

  const double half_beta = 0.5 * beta;
  PruneResult res;
  double max_delta = 0.0;
  int sweep = 0;
  for (; sweep < kMaxSweeps; ++sweep) {
    max_delta = 0.0;
    for (std::size_t k = 0; k < kk; ++k) {
      const double dkk = gram_[k * kk + k];
      double next;
      if (dkk <= 0.0) {
        // A tree with identically-zero predictions cannot reduce the loss;
        // the penalty then pins its weight at zero.
        next = 0.0;
      } else {
        const double rho = corr_[k] - g[k] + dkk * alpha[k];
        next = std::max(0.0, (rho - half_beta) / dkk);
      }
      const double delta = next - alpha[k];
      if (delta != 0.0) {
        const double* grow = gram_.data() + k * kk;
        for (std::size_t j = 0; j < kk; ++j) g[j] += delta * grow[j];
        alpha[k] = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < kSweepTolerance) break;
    if ((sweep & 127) == 127) {
      // Refresh the running product to stop incremental rounding drift.
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t k = 0; k < kk; ++k) {
        if (alpha[k] == 0.0) continue;
        const double* grow = gram_.data() + k * kk;
        for (std::size_t j = 0; j < kk; ++j) g[j] += alpha[k] * grow[j];
      }
    }
  }

  res.converged = max_delta < kSweepTolerance;
  res.final_delta = max_delta;
  res.sweeps = std::min(sweep + 1, kMaxSweeps);

  // Exact recomputation of the fit terms at the solution.
  std::fill(g.begin(), g.end(), 0.0);
  for (std::size_t k = 0; k < kk; ++k) {
    if (alpha[k] == 0.0) continue;
    const double* grow = gram_.data() + k * kk;
    for (std::size_t j = 0; j < kk; ++j) g[j] += alpha[k] * grow[j];
  }
  double quad = y_sumsq_over_n_;
  double penalty = 0.0;
  for (std::size_t k = 0; k < kk; ++k) {
    quad += alpha[k] * (g[k] - 2.0 * corr_[k]);
    penalty += alpha[k];
  }
  quad = std::max(quad, 0.0);
  res.objective = quad + beta * penalty;
  res.resubstitution_error = std::sqrt(quad);
  res.alpha = std::move(alpha);
  for (int k = 0; k < k_; ++k)
    if (res.alpha[static_cast<std::size_t>(k)] > kActiveThreshold)
      res.active.push_back(k);
  res.n_active = static_cast<int>(res.active.size());
  return res;
}

PruneResult lasso_prune(const Ensemble& e, const FeatureMatrix& x_val,
                        std::span<const double> y_val, double beta) {
  return EnsemblePruner(e, x_val, y_val).prune(beta);
}

Ensemble select_trees(const Ensemble& e, const FeatureMatrix& x_val,
                      std::span<const double> y_val, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw argument_error("select_trees: lambda must be finite and > 0");
  const EnsemblePruner pruner(e, x_val, y_val);
  const double budget = 1.0 / lambda;

  auto alpha_sum = [](const PruneResult& r) {
    double s = 0.0;
    for (double a : r.alpha) s += a;
    return s;
  };

  PruneResult at_zero = pruner.prune(0.0);
  PruneResult chosen;
  if (alpha_sum(at_zero) <= budget) {
    chosen = std::move(at_zero);
  } else {
    double lo = 0.0;
    double hi = std::max(pruner.beta_ceiling(), 1e-12);
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (alpha_sum(pruner.prune(mid)) <= budget)
        hi = mid;
      else
        lo = mid;
    }
    chosen = pruner.prune(hi);
  }

  // A large enough lambda legitimately empties the active set; callers that
  // need a prediction must check before calling predict_bagged.
  Ensemble out = e;
  out.alpha = chosen.alpha;
  for (double& a : out.alpha)
    if (a <= kActiveThreshold) a = 0.0;
  out.active = chosen.active;
  out.lambda = lambda;
  return out;
}

std::vector<LambdaSweepPoint> sweep_beta(const Ensemble& e,
                                         const FeatureMatrix& x_val,
                                         std::span<const double> y_val,
                                         std::span<const double> betas) {
  const EnsemblePruner pruner(e, x_val, y_val);
  std::vector<LambdaSweepPoint> points;
  points.reserve(betas.size());
  for (double beta : betas) {
    const PruneResult r = pruner.prune(beta);
    double s = 0.0;
    for (double a : r.alpha) s += a;
    LambdaSweepPoint p;
    p.beta = beta;
    p.lambda = s > 0.0 ? 1.0 / s : std::numeric_limits<double>::infinity();
    p.n_active = r.n_active;
    p.resub_error = r.resubstitution_error;
    points.push_back(p);
  }
  return points;
}

std::vector<TreeCountCV> cross_validate_treecount(const FeatureMatrix& X,
                                                  std::span<const double> y,
                                                  std::span<const int> k_grid,
                                                  int folds, const FitParams& params,
                                                  std::uint64_t seed, int threads) {
  params.validate();
  const int n = static_cast<int>(X.rows);
  if (k_grid.empty()) throw argument_error("cross_validate_treecount: empty k_grid");
  for (int k : k_grid)
    if (k < 1) throw argument_error("cross_validate_treecount: tree counts must be >= 1");
  if (folds < 2) throw argument_error("cross_validate_treecount: need folds >= 2");
  if (folds > n)
    throw argument_error("cross_validate_treecount: folds " + std::to_string(folds) +
                         " exceeds row count " + std::to_string(n));
  if (y.size() != X.rows)
    throw dimension_error("cross_validate_treecount: row/target count mismatch");

  const int k_max = *std::max_element(k_grid.begin(), k_grid.end());

  // Deterministic fold assignment: shuffle once, chunk into near-equal parts.
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(derive_seed(seed, "folds"));
  shuffle(order, rng);
  std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(folds));
  const int base = n / folds;
  const int extra = n % folds;
  int pos = 0;
  for (int f = 0; f < folds; ++f) {
    const int len = base + (f < extra ? 1 : 0);
    auto& rows = fold_rows[static_cast<std::size_t>(f)];
    rows.assign(order.begin() + pos, order.begin() + pos + len);
    pos += len;
  }

  // Accumulate squared error per bag size; tree k of a fold's bag is seeded
  // by (seed, fold, k), so smaller bag sizes are prefixes of the largest.
  std::vector<std::vector<double>> fold_sse(
      static_cast<std::size_t>(folds),
      std::vector<double>(k_grid.size(), 0.0));

  parallel_for(folds, threads, [&](int f) {
    const auto& held_out = fold_rows[static_cast<std::size_t>(f)];
    FeatureMatrix xt;
    xt.cols = X.cols;
    std::vector<double> yt;
    for (int g = 0; g < folds; ++g) {
      if (g == f) continue;
      for (int r : fold_rows[static_cast<std::size_t>(g)]) {
        xt.push_row(X.row(static_cast<std::size_t>(r)));
        yt.push_back(y[static_cast<std::size_t>(r)]);
      }
    }
    const Ensemble bag = fit_bagged(xt, yt, k_max, params,
                                    derive_seed(seed, "fold", static_cast<std::uint64_t>(f)));
    for (int r : held_out) {
      const auto row = X.row(static_cast<std::size_t>(r));
      // Single pass over trees; prefix means score every requested bag size.
      double running = 0.0;
      std::vector<double> prefix_pred(static_cast<std::size_t>(k_max) + 1, 0.0);
      for (int k = 0; k < k_max; ++k) {
        running += predict(bag.trees[static_cast<std::size_t>(k)], row);
        prefix_pred[static_cast<std::size_t>(k) + 1] = running / (k + 1);
      }
      for (std::size_t i = 0; i < k_grid.size(); ++i) {
        const double err = prefix_pred[static_cast<std::size_t>(k_grid[i])] -
                           y[static_cast<std::size_t>(r)];
        fold_sse[static_cast<std::size_t>(f)][i] += err * err;
      }
    }
  });

  std::vector<TreeCountCV> out(k_grid.size());
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    double mean_rmse = 0.0;
    for (int f = 0; f < folds; ++f) {
      const auto held = static_cast<double>(fold_rows[static_cast<std::size_t>(f)].size());
      mean_rmse += std::sqrt(fold_sse[static_cast<std::size_t>(f)][i] / held);
    }
    out[i].k_trees = k_grid[i];
    out[i].cv_rmse = mean_rmse / folds;
  }
  return out;
}

nlohmann::json ensemble_to_json(const Ensemble& e) {
  nlohmann::json j;
  j["params"] = {{"min_error_decrease", e.params.min_error_decrease},
                 {"min_leaf_count", e.params.min_leaf_count},
                 {"max_depth", e.params.max_depth}};
  j["tree_seeds"] = e.tree_seeds;
  j["alpha"] = e.alpha;
  j["active"] = e.active;
  j["lambda"] = e.lambda;
  j["n_features"] = e.n_features;
  auto trees = nlohmann::json::array();
  for (const auto& t : e.trees) trees.push_back(tree_to_json(t));
  j["trees"] = std::move(trees);
  return j;
}

Ensemble ensemble_from_json(const nlohmann::json& j) {
  Ensemble e;
  try {
    const auto& p = j.at("params");
    e.params.min_error_decrease = p.at("min_error_decrease").get<double>();
    e.params.min_leaf_count = p.at("min_leaf_count").get<int>();
    e.params.max_depth = p.at("max_depth").get<int>();
    e.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
    e.alpha = j.at("alpha").get<std::vector<double>>();
    e.active = j.at("active").get<std::vector<int>>();
    e.lambda = j.at("lambda").get<double>();
    e.n_features = j.at("n_features").get<int>();
    for (const auto& tj : j.at("trees"))
      e.trees.push_back(tree_from_json(tj, e.n_features));
  } catch (const nlohmann::json::exception& ex) {
    throw schema_error(std::string("ensemble_from_json: ") + ex.what());
  }
  if (e.alpha.size() != e.trees.size() || e.tree_seeds.size() != e.trees.size())
    throw schema_error("ensemble_from_json: inconsistent array lengths");
  for (int k : e.active)
    if (k < 0 || k >= e.tree_count())
      throw schema_error("ensemble_from_json: active index out of range");
  return e;
}

}  // namespace tdr
