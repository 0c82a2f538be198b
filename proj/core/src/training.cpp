#include "yieldnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "yieldnet/io.hpp"
#include "yieldnet/log.hpp"
#include "yieldnet/rng.hpp"

namespace yieldnet {

using ad::Tape;
using ad::Var;

namespace {

// Samples per tape. Fixed so gradient summation order does not depend on
// the thread count.
constexpr std::size_t kChunk = 25;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Σ w_i (p_i - t_i)^2 over a prediction vector, with constant targets/weights.
Var weighted_squared_error(Var predictions, std::vector<double> targets, std::vector<double> weights) {
  auto p = predictions.value();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double d = p[i] - targets[i];
    total += weights[i] * d * d;
  }
  const std::size_t pid = predictions.id();
  return predictions.tape().record(
      {1}, {total}, [pid, targets = std::move(targets), weights = std::move(weights)](Tape& t, std::size_t self) {
        const double g = t.upstream(self)[0];
        auto pv = t.value_of(pid);
        auto gp = t.grad_of(pid);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          if (weights[i] != 0.0) gp[i] += g * 2.0 * weights[i] * (pv[i] - targets[i]);
        }
      });
}

struct PreparedSet {
  std::vector<ModelInput> inputs;
  /// Per sample, per step; NaN where no yield is known.
  std::vector<std::vector<double>> step_targets;
};

PreparedSet prepare_set(const CnnRnnModel& model, std::span<const SequenceSample> samples) {
  PreparedSet set;
  set.inputs = model.inputs.prepare(samples);
  for (const auto& s : samples) {
    std::vector<double> targets;
    for (std::size_t i = 0; i < s.window.size(); ++i) {
      const bool last = i + 1 == s.window.size();
      const auto& y = last ? s.target : s.window[i].yield;
      targets.push_back(y.has_value() ? *y : kNaN);
    }
    set.step_targets.push_back(std::move(targets));
  }
  return set;
}

struct ChunkResult {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;
};

ChunkResult chunk_gradient(const CnnRnnModel& model, const PreparedSet& data, std::span<const std::size_t> picks,
                           const std::vector<double>& step_weight_norm) {
  Tape tape;
  std::vector<const ModelInput*> batch;
  for (std::size_t i : picks) batch.push_back(&data.inputs[i]);
  auto graph = cnn_rnn_graph(tape, model, batch);

  const std::size_t steps = graph.predictions.size();
  const std::size_t first = model.config.all_step_loss ? 0 : steps - 1;
  Var loss;
  for (std::size_t s = first; s < steps; ++s) {
    std::vector<double> targets(picks.size()), weights(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const double y = data.step_targets[picks[i]][s];
      targets[i] = std::isnan(y) ? 0.0 : y;
      weights[i] = std::isnan(y) ? 0.0 : step_weight_norm[s];
    }
    Var term = weighted_squared_error(graph.predictions[s], std::move(targets), std::move(weights));
    loss = loss.valid() ? ad::add(loss, term) : term;
  }

  ChunkResult result;
  result.loss = loss.item();
  tape.backward(loss);
  result.grads.reserve(graph.params.size());
  for (const Var& p : graph.params) {
    auto g = tape.grad(p);
    result.grads.emplace_back(g.begin(), g.end());
  }
  return result;
}

void check_finite_loss(double loss, std::size_t iter, ParameterSet& params, const ParameterSet& checkpoint,
                       AdamState& state, const AdamState& checkpoint_state) {
  if (std::isfinite(loss)) return;
  params = checkpoint;
  state = checkpoint_state;
  throw TrainingAborted("non-finite training loss at iteration " + std::to_string(iter) +
                            "; parameters restored to the last finite checkpoint",
                        iter);
}

void log_progress(const LossCurveRow& row, const TrainConfig& config) {
  if (config.log_every == 0 || row.iter % config.log_every != 0) return;
  std::string line = "iter " + std::to_string(row.iter) + " lr " + format_double(row.lr) + " train_loss " +
                     format_double(row.train_loss);
  if (!std::isnan(row.monitor_loss)) line += " monitor_loss " + format_double(row.monitor_loss);
  log_info(line);
}

}  // namespace

void TrainConfig::validate() const {
  require(base_lr > 0.0, "learning rate must be positive");
  require(halve_every > 0, "halve_every must be positive");
  require(batch_size > 0, "batch size must be positive");
  require(curve_every > 0, "curve interval must be positive");
  require(threads > 0, "thread count must be positive");
}

double lr_schedule(std::size_t iter, const TrainConfig& config) {
  const auto halvings = static_cast<int>(iter / config.halve_every);
  return std::ldexp(config.base_lr, -halvings);
}

AdamState AdamState::for_params(const ParameterSet& params) {
  AdamState state;
  for (const auto& t : params.tensors) {
    state.m.emplace_back(t.size(), 0.0);
    state.v.emplace_back(t.size(), 0.0);
  }
  return state;
}

void adam_step(ParameterSet& params, const std::vector<std::vector<double>>& grads, AdamState& state, double lr) {
  require(grads.size() == params.size() && state.m.size() == params.size() && state.v.size() == params.size(),
          "adam_step: parameter, gradient and moment counts differ");
  for (std::size_t p = 0; p < params.size(); ++p) {
    require(grads[p].size() == params.tensors[p].size(), "adam_step: gradient shape mismatch for " + params.names[p]);
    for (double g : grads[p]) {
      if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient for " + params.names[p]);
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params.tensors[p].values();
    auto& m = state.m[p];
    auto& v = state.v[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  require(!predictions.empty(), "mse_loss requires at least one value");
  require(predictions.size() == targets.size(), "mse_loss lengths differ");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    total += d * d;
  }
  return total / static_cast<double>(predictions.size());
}

InputPipeline fit_input_pipeline(std::span<const SequenceSample> train, const FeatureLayout& layout,
                                 std::span<const std::uint8_t> keep) {
  InputPipeline pipeline = InputPipeline::fit(train, layout);
  pipeline.keep.assign(keep.begin(), keep.end());
  return pipeline;
}

TargetScale fit_target_scale(std::span<const SequenceSample> train) {
  require(!train.empty(), "target scale needs training samples");
  double total = 0.0;
  for (const auto& s : train) {
    require(s.target.has_value(), "training sample without a target yield");
    total += *s.target;
  }
  const double n = static_cast<double>(train.size());
  const double mean = total / n;
  double sq = 0.0;
  for (const auto& s : train) sq += (*s.target - mean) * (*s.target - mean);
  const double sd = std::sqrt(sq / n);
  return {mean, sd > 1e-12 ? sd : 1.0};
}

TrainReport train_cnn_rnn(CnnRnnModel& model, std::span<const SequenceSample> train, const TrainConfig& config,
                          std::span<const SequenceSample> monitor) {
  config.validate();
  require(!train.empty(), "training set is empty");
  model.inputs = fit_input_pipeline(train, model.config.layout(), model.inputs.keep);
  model.target = fit_target_scale(train);

  const PreparedSet data = prepare_set(model, train);
  std::vector<SequenceSample> labelled;
  for (const auto& s : monitor)
    if (s.target.has_value()) labelled.push_back(s);
  const PreparedSet monitor_data = prepare_set(model, labelled);
  std::vector<double> monitor_targets;
  for (const auto& t : monitor_data.step_targets) monitor_targets.push_back(t.back());

  // Per-step weight turning the summed squared error into a batch mean.
  const std::size_t steps = model.config.steps();
  std::vector<double> step_weight(steps, 0.0);
  const double batch = static_cast<double>(config.batch_size);
  if (model.config.all_step_loss) {
    std::fill(step_weight.begin(), step_weight.end(), 1.0 / (batch * static_cast<double>(steps)));
  } else {
    step_weight.back() = 1.0 / batch;
  }

  Rng rng(mix_seed(config.seed, 0x747261696eULL));
  AdamState state = AdamState::for_params(model.params);
  ParameterSet checkpoint = model.params;
  AdamState checkpoint_state = state;

  TrainReport report;
  report.batch_losses.reserve(config.max_iters);
  double window_sum = 0.0;
  std::size_t window_count = 0;

  std::vector<std::size_t> picks(config.batch_size);
  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    for (auto& p : picks) p = rng.below(train.size());

    const std::size_t chunks = (picks.size() + kChunk - 1) / kChunk;
    std::vector<ChunkResult> results(chunks);
    auto run_chunk = [&](std::size_t c) {
      const std::size_t begin = c * kChunk;
      const std::size_t end = std::min(picks.size(), begin + kChunk);
      results[c] = chunk_gradient(model, data, std::span(picks).subspan(begin, end - begin), step_weight);
    };
    if (config.threads <= 1 || chunks == 1) {
      for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    } else {
      const std::size_t workers = std::min(config.threads, chunks);
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
        });
      }
    }

    double loss = 0.0;
    std::vector<std::vector<double>> grads = std::move(results[0].grads);
    loss += results[0].loss;
    for (std::size_t c = 1; c < chunks; ++c) {
      loss += results[c].loss;
      for (std::size_t p = 0; p < grads.size(); ++p)
        for (std::size_t i = 0; i < grads[p].size(); ++i) grads[p][i] += results[c].grads[p][i];
    }
    check_finite_loss(loss, iter, model.params, checkpoint, state, checkpoint_state);

    const double lr = lr_schedule(iter, config);
    adam_step(model.params, grads, state, lr);
    report.batch_losses.push_back(loss);
    window_sum += loss;
    ++window_count;

    if ((iter + 1) % config.curve_every == 0 || iter + 1 == config.max_iters) {
      LossCurveRow row;
      row.iter = iter + 1;
      row.lr = lr;
      row.train_loss = window_sum / static_cast<double>(window_count);
      row.monitor_loss = kNaN;
      if (!monitor_data.inputs.empty()) {
        row.monitor_loss = mse_loss(cnn_rnn_predict(model, monitor_data.inputs), monitor_targets);
      }
      report.curve.push_back(row);
      log_progress(row, config);
      window_sum = 0.0;
      window_count = 0;
      checkpoint = model.params;
      checkpoint_state = state;
    }
  }
  return report;
}

TrainReport train_dfnn(DfnnModel& model, std::span<const SequenceSample> train, const TrainConfig& config,
                       std::span<const SequenceSample> monitor) {
  config.validate();
  require(!train.empty(), "training set is empty");
  const FeatureLayout layout{train.front().target_record().management.size()};
  require(layout.size() == model.config.input_dim, "DFNN input dimension does not match the feature layout");
  model.inputs = fit_input_pipeline(train, layout, model.inputs.keep);
  model.target = fit_target_scale(train);

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  for (const auto& s : train) {
    rows.push_back(model.inputs.prepare_flat(s));
    targets.push_back(*s.target);
  }
  std::vector<std::vector<double>> monitor_rows;
  std::vector<double> monitor_targets;
  for (const auto& s : monitor) {
    if (!s.target.has_value()) continue;
    monitor_rows.push_back(model.inputs.prepare_flat(s));
    monitor_targets.push_back(*s.target);
  }

  Rng rng(mix_seed(config.seed, 0x646666ULL));
  AdamState state = AdamState::for_params(model.params);
  ParameterSet checkpoint = model.params;
  AdamState checkpoint_state = state;
  auto running_mean_checkpoint = model.running_mean;
  auto running_var_checkpoint = model.running_var;

  TrainReport report;
  double window_sum = 0.0;
  std::size_t window_count = 0;
  const std::size_t width = model.config.input_dim;
  const double momentum = model.config.bn_momentum;

  for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
    std::vector<double> flat;
    std::vector<double> batch_targets;
    flat.reserve(config.batch_size * width);
    for (std::size_t i = 0; i < config.batch_size; ++i) {
      const std::size_t pick = rng.below(rows.size());
      flat.insert(flat.end(), rows[pick].begin(), rows[pick].end());
      batch_targets.push_back(targets[pick]);
    }
    Tape tape;
    auto params = model.params.bind(tape);
    Var x = tape.input({config.batch_size, width}, flat);
    std::vector<ad::BatchNormStats> stats;
    Var pred = dfnn_graph(model, params, x, true, &stats);
    Var loss = ad::mse_loss(pred, batch_targets);
    if (!std::isfinite(loss.item())) {
      model.running_mean = running_mean_checkpoint;
      model.running_var = running_var_checkpoint;
    }
    check_finite_loss(loss.item(), iter, model.params, checkpoint, state, checkpoint_state);
    tape.backward(loss);
    std::vector<std::vector<double>> grads;
    for (const Var& p : params) {
      auto g = tape.grad(p);
      grads.emplace_back(g.begin(), g.end());
    }
    const double lr = lr_schedule(iter, config);
    adam_step(model.params, grads, state, lr);
    for (std::size_t l = 0; l < stats.size(); ++l) {
      for (std::size_t j = 0; j < stats[l].mean.size(); ++j) {
        model.running_mean[l][j] = momentum * model.running_mean[l][j] + (1.0 - momentum) * stats[l].mean[j];
        model.running_var[l][j] = momentum * model.running_var[l][j] + (1.0 - momentum) * stats[l].variance[j];
      }
    }
    report.batch_losses.push_back(loss.item());
    window_sum += loss.item();
    ++window_count;

    if ((iter + 1) % config.curve_every == 0 || iter + 1 == config.max_iters) {
      LossCurveRow row;
      row.iter = iter + 1;
      row.lr = lr;
      row.train_loss = window_sum / static_cast<double>(window_count);
      row.monitor_loss = monitor_rows.empty() ? kNaN : mse_loss(dfnn_predict(model, monitor_rows), monitor_targets);
      report.curve.push_back(row);
      log_progress(row, config);
      window_sum = 0.0;
      window_count = 0;
      checkpoint = model.params;
      checkpoint_state = state;
      running_mean_checkpoint = model.running_mean;
      running_var_checkpoint = model.running_var;
    }
  }
  return report;
}

}  // namespace yieldnet
