#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace yieldnet {

// Baselines consume row-major feature rows (see flatten_features) and
// targets in bu/acre.

struct LassoModel {
  std::vector<double> coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  /// Columns left at zero because they had no variance.
  std::vector<std::size_t> excluded;
  std::size_t sweeps = 0;
  bool converged = false;

  double predict(std::span<const double> row) const;
  bool operator==(const LassoModel&) const = default;
};

struct LassoOptions {
  double tolerance = 1e-8;
  std::size_t max_sweeps = 10000;
};

/// Cyclic coordinate descent with soft-thresholding on
///   (1 / 2n) |y - X b - b0|^2 + lambda |b|_1.
/// `objective_trace`, when given, receives the objective after every sweep.
LassoModel fit_lasso(std::span<const std::vector<double>> x, std::span<const double> y, double lambda,
                     const LassoOptions& options = {}, std::vector<double>* objective_trace = nullptr);

double lasso_objective(const LassoModel& model, std::span<const std::vector<double>> x, std::span<const double> y);

/// S(z, g) = sign(z) * max(|z| - g, 0)
double soft_threshold(double z, double gamma);

struct TreeNode {
  static constexpr std::size_t kLeaf = std::numeric_limits<std::size_t>::max();
  std::size_t feature = kLeaf;
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  /// Mean target of the training rows that reached this node.
  double value = 0.0;
  std::size_t depth = 0;

  bool is_leaf() const { return feature == kLeaf; }
  bool operator==(const TreeNode&) const = default;
};

/// CART regression tree; node 0 is the root. Rows with x[feature] <= threshold go left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  std::size_t depth() const;
  bool operator==(const RegressionTree&) const = default;
};

struct ForestConfig {
  std::size_t n_trees = 50;
  std::size_t max_depth = 10;
  std::size_t min_leaf = 2;
  /// Features examined per split; 0 means ceil(p / 3).
  std::size_t features_per_split = 0;
  bool bootstrap = true;
  std::uint64_t seed = 42;
  /// Trees are independent given their seeds, so this only affects speed.
  std::size_t threads = 1;
};

struct ForestModel {
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> row) const;
  bool operator==(const ForestModel&) const = default;
};

/// Splits maximize the reduction in squared error over a random feature
/// subset. Ties go to the lowest feature index, then the lowest threshold.
/// Tree i is seeded with mix_seed(config.seed, i).
ForestModel fit_random_forest(std::span<const std::vector<double>> x, std::span<const double> y,
                              const ForestConfig& config);

RegressionTree fit_regression_tree(std::span<const std::vector<double>> x, std::span<const double> y,
                                   std::span<const std::size_t> rows, const ForestConfig& config,
                                   std::uint64_t seed);

/// Predicts the training mean for every input.
struct AverageModel {
  double mean = 0.0;

  double predict() const { return mean; }
  bool operator==(const AverageModel&) const = default;
};

AverageModel average_baseline(std::span<const double> train_targets);

}  // namespace yieldnet
