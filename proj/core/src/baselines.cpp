#include "yieldnet/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "yieldnet/error.hpp"
#include "yieldnet/log.hpp"
#include "yieldnet/rng.hpp"

namespace yieldnet {
namespace {

std::size_t checked_width(std::span<const std::vector<double>> x, std::span<const double> y) {
  require(!x.empty(), "baseline fit needs at least one row");
  require(x.size() == y.size(), "row count " + std::to_string(x.size()) + " differs from target count " +
                                    std::to_string(y.size()));
  const std::size_t p = x.front().size();
  for (const auto& row : x) require(row.size() == p, "feature rows have different widths");
  return p;
}

double mean_of(std::span<const double> v) {
  double total = 0.0;
  for (double value : v) total += value;
  return total / static_cast<double>(v.size());
}

}  // namespace

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

double LassoModel::predict(std::span<const double> row) const {
  require(row.size() == coefficients.size(), "lasso input width does not match the model");
  double total = intercept;
  for (std::size_t j = 0; j < row.size(); ++j) total += coefficients[j] * row[j];
  return total;
}

double lasso_objective(const LassoModel& model, std::span<const std::vector<double>> x, std::span<const double> y) {
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - model.predict(x[i]);
    sq += r * r;
  }
  double l1 = 0.0;
  for (double b : model.coefficients) l1 += std::abs(b);
  return sq / (2.0 * static_cast<double>(x.size())) + model.lambda * l1;
}

LassoModel fit_lasso(std::span<const std::vector<double>> x, std::span<const double> y, double lambda,
                     const LassoOptions& options, std::vector<double>* objective_trace) {
  const std::size_t p = checked_width(x, y);
  const std::size_t n = x.size();
  require(n >= 2, "fit_lasso needs at least two rows");
  require(lambda >= 0.0, "lasso lambda must be non-negative");
  const double dn = static_cast<double>(n);

  // Column-major copy, centred so the intercept decouples from the coefficients.
  std::vector<std::vector<double>> cols(p, std::vector<double>(n));
  std::vector<double> col_mean(p, 0.0), col_sq(p, 0.0);
  LassoModel model;
  model.lambda = lambda;
  model.coefficients.assign(p, 0.0);
  std::vector<std::uint8_t> active(p, 1);
  for (std::size_t j = 0; j < p; ++j) {
    const double first = x[0][j];
    bool constant = true;
    for (std::size_t i = 0; i < n; ++i) {
      cols[j][i] = x[i][j];
      col_mean[j] += x[i][j];
      constant = constant && x[i][j] == first;
    }
    col_mean[j] /= dn;
    if (constant) {
      active[j] = 0;
      model.excluded.push_back(j);
      continue;
    }
    for (double& v : cols[j]) v -= col_mean[j];
    for (double v : cols[j]) col_sq[j] += v * v;
    col_sq[j] /= dn;
  }
  if (!model.excluded.empty()) {
    log_warning("fit_lasso: excluded " + std::to_string(model.excluded.size()) +
                " constant column(s), first index " + std::to_string(model.excluded.front()));
  }

  const double y_mean = mean_of(y);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - y_mean;

  auto finish = [&] {
    double shift = 0.0;
    for (std::size_t j = 0; j < p; ++j) shift += model.coefficients[j] * col_mean[j];
    model.intercept = y_mean - shift;
  };

  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (!active[j]) continue;
      const double old = model.coefficients[j];
      const double* c = cols[j].data();
      double rho = 0.0;
      for (std::size_t i = 0; i < n; ++i) rho += c[i] * residual[i];
      rho = rho / dn + col_sq[j] * old;
      const double updated = soft_threshold(rho, lambda) / col_sq[j];
      const double delta = updated - old;
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) residual[i] -= delta * c[i];
        model.coefficients[j] = updated;
      }
      max_change = std::max(max_change, std::abs(delta));
    }
    model.sweeps = sweep + 1;
    if (objective_trace != nullptr) {
      finish();
      objective_trace->push_back(lasso_objective(model, x, y));
    }
    if (max_change < options.tolerance) {
      model.converged = true;
      break;
    }
  }
  finish();
  if (!model.converged) {
    log_warning("fit_lasso: no convergence after " + std::to_string(model.sweeps) + " sweeps");
  }
  return model;
}

double RegressionTree::predict(std::span<const double> row) const {
  require(!nodes.empty(), "prediction from an empty tree");
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const TreeNode& node = nodes[at];
    require(node.feature < row.size(), "tree input is narrower than the training rows");
    at = row[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[at].value;
}

std::size_t RegressionTree::depth() const {
  std::size_t d = 0;
  for (const auto& node : nodes) d = std::max(d, node.depth);
  return d;
}

namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const std::vector<double>> x, std::span<const double> y, const ForestConfig& config,
              std::size_t mtry, std::uint64_t seed)
      : x_(x), y_(y), config_(config), mtry_(mtry), rng_(seed), p_(x.front().size()) {
    candidates_.resize(p_);
  }

  RegressionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::size_t grow(std::vector<std::size_t> rows, std::size_t depth) {
    const std::size_t id = tree_.nodes.size();
    tree_.nodes.push_back({});
    double total = 0.0;
    for (std::size_t r : rows) total += y_[r];
    tree_.nodes[id].value = total / static_cast<double>(rows.size());
    tree_.nodes[id].depth = depth;

    if (depth >= config_.max_depth || rows.size() < 2 * config_.min_leaf) return id;
    const Split split = best_split(rows);
    if (!split.found) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (x_[r][split.feature] <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const std::size_t l = grow(std::move(left), depth + 1);
    const std::size_t rr = grow(std::move(right), depth + 1);
    TreeNode& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = rr;
    return id;
  }

  // Partial Fisher-Yates draw of mtry features, then ascending order so
  // ties resolve to the lowest index.
  std::vector<std::size_t> draw_features() {
    std::iota(candidates_.begin(), candidates_.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry_; ++i) {
      const std::size_t j = i + rng_.below(p_ - i);
      std::swap(candidates_[i], candidates_[j]);
    }
    std::vector<std::size_t> chosen(candidates_.begin(), candidates_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  Split best_split(const std::vector<std::size_t>& rows) {
    const std::size_t n = rows.size();
    double sum = 0.0, sq = 0.0;
    for (std::size_t r : rows) {
      sum += y_[r];
      sq += y_[r] * y_[r];
    }
    const double parent_sse = sq - sum * sum / static_cast<double>(n);
    Split best;
    if (!(parent_sse > 1e-12 * std::max(1.0, sq))) return best;

    std::vector<std::pair<double, double>> order(n);
    for (std::size_t f : draw_features()) {
      for (std::size_t i = 0; i < n; ++i) order[i] = {x_[rows[i]][f], y_[rows[i]]};
      std::sort(order.begin(), order.end());
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += order[i].second;
        if (order[i].first == order[i + 1].first) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < config_.min_leaf || nr < config_.min_leaf) continue;
        const double right_sum = sum - left_sum;
        // SSE reduction = nl*mean_l^2 + nr*mean_r^2 - n*mean^2.
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - sum * sum / static_cast<double>(n);
        if (gain > best.gain + 1e-12 * std::max(1.0, parent_sse) || !best.found) {
          if (gain <= 0.0) continue;
          best = {true, f, 0.5 * (order[i].first + order[i + 1].first), gain};
        }
      }
    }
    return best;
  }

  std::span<const std::vector<double>> x_;
  std::span<const double> y_;
  const ForestConfig& config_;
  std::size_t mtry_;
  Rng rng_;
  std::size_t p_;
  std::vector<std::size_t> candidates_;
  RegressionTree tree_;
};

std::size_t features_per_split(const ForestConfig& config, std::size_t p) {
  const std::size_t m = config.features_per_split == 0 ? (p + 2) / 3 : config.features_per_split;
  return std::clamp<std::size_t>(m, 1, p);
}

}  // namespace

RegressionTree fit_regression_tree(std::span<const std::vector<double>> x, std::span<const double> y,
                                   std::span<const std::size_t> rows, const ForestConfig& config,
                                   std::uint64_t seed) {
  const std::size_t p = checked_width(x, y);
  require(!rows.empty(), "tree needs at least one row");
  require(p > 0, "tree needs at least one feature");
  require(config.min_leaf >= 1, "min_leaf must be positive");
  TreeBuilder builder(x, y, config, features_per_split(config, p), seed);
  return builder.build(std::vector<std::size_t>(rows.begin(), rows.end()));
}

ForestModel fit_random_forest(std::span<const std::vector<double>> x, std::span<const double> y,
                              const ForestConfig& config) {
  checked_width(x, y);
  require(x.size() >= 2, "fit_random_forest needs at least two rows");
  require(config.n_trees >= 1, "forest needs at least one tree");
  require(config.threads >= 1, "thread count must be positive");
  const std::size_t n = x.size();

  ForestModel forest;
  forest.trees.resize(config.n_trees);
  auto fit_one = [&](std::size_t t) {
    const std::uint64_t seed = mix_seed(config.seed, t);
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      Rng bag(mix_seed(seed, 0x626167));
      for (auto& r : rows) r = bag.below(n);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees[t] = fit_regression_tree(x, y, rows, config, seed);
  };

  const std::size_t workers = std::min(config.threads, config.n_trees);
  if (workers <= 1) {
    for (std::size_t t = 0; t < config.n_trees; ++t) fit_one(t);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < config.n_trees; t += workers) fit_one(t);
      });
    }
  }
  return forest;
}

double ForestModel::predict(std::span<const double> row) const {
  require(!trees.empty(), "prediction from an empty forest");
  // Summed in sorted order so the result does not depend on tree order.
  std::vector<double> votes;
  votes.reserve(trees.size());
  for (const auto& tree : trees) votes.push_back(tree.predict(row));
  std::sort(votes.begin(), votes.end());
  double total = 0.0;
  for (double v : votes) total += v;
  return total / static_cast<double>(votes.size());
}

AverageModel average_baseline(std::span<const double> train_targets) {
  require(!train_targets.empty(), "average baseline needs at least one target");
  return {mean_of(train_targets)};
}

}  // namespace yieldnet
