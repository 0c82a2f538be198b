#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yieldnet/data.hpp"
#include "yieldnet/error.hpp"
#include "yieldnet/features.hpp"
#include "yieldnet/model.hpp"

namespace yieldnet {

/// Thrown when the loss goes non-finite. The model has been rolled back to
/// the last checkpoint with a finite loss.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(const std::string& message, std::size_t iteration)
      : NumericalError(message), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct TrainConfig {
  double base_lr = 3e-4;
  std::size_t halve_every = 60000;
  /// 350000 at full scale; the desk default is 20000.
  std::size_t max_iters = 20000;
  std::size_t batch_size = 25;
  std::uint64_t seed = 42;
  /// Spacing of loss-curve rows (and rollback checkpoints).
  std::size_t curve_every = 100;
  std::size_t threads = 1;
  /// Log a loss line every this many iterations (0 = silent).
  std::size_t log_every = 0;

  void validate() const;
};

/// base_lr / 2^floor(iter / halve_every)
double lr_schedule(std::size_t iter, const TrainConfig& config);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ParameterSet& params);
};

/// One bias-corrected Adam update of every tensor. Throws NumericalError on
/// a non-finite gradient before touching any parameter.
void adam_step(ParameterSet& params, const std::vector<std::vector<double>>& grads, AdamState& state, double lr);

/// Mean squared difference. Lengths must match and be non-zero.
double mse_loss(std::span<const double> predictions, std::span<const double> targets);

struct LossCurveRow {
  std::size_t iter = 0;
  double lr = 0.0;
  /// Mean mini-batch loss over the iterations since the previous row.
  double train_loss = 0.0;
  /// NaN when no monitoring slice was given.
  double monitor_loss = 0.0;
};

struct TrainReport {
  std::vector<LossCurveRow> curve;
  /// Mini-batch loss of every iteration.
  std::vector<double> batch_losses;
};

/// Fits the model's input standardization (keeping any existing feature
/// mask) and output scale on `train`, then runs mini-batch Adam on the
/// final-step MSE. `monitor` only feeds the loss curve.
TrainReport train_cnn_rnn(CnnRnnModel& model, std::span<const SequenceSample> train, const TrainConfig& config,
                          std::span<const SequenceSample> monitor = {});

/// Same loop for the fully connected baseline on target-year features.
TrainReport train_dfnn(DfnnModel& model, std::span<const SequenceSample> train, const TrainConfig& config,
                       std::span<const SequenceSample> monitor = {});

/// Fits standardization and target scale without training; shared by both
/// networks and exposed for tests of the no-leakage property.
InputPipeline fit_input_pipeline(std::span<const SequenceSample> train, const FeatureLayout& layout,
                                 std::span<const std::uint8_t> keep);
TargetScale fit_target_scale(std::span<const SequenceSample> train);

}  // namespace yieldnet
