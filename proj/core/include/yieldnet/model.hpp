#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "yieldnet/autodiff.hpp"
#include "yieldnet/data.hpp"
#include "yieldnet/features.hpp"
#include "yieldnet/ops.hpp"

namespace yieldnet {

struct ConvLayerSpec {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  /// Average-pool (window 2, stride 2) after the ReLU.
  bool pool = true;

  bool operator==(const ConvLayerSpec&) const = default;
};

/// Architecture of the hybrid network. The conv stacks are a configurable
/// default: four length-preserving convolutions per branch, ReLU, average
/// pooling. The soil branch pools only after its first two layers because a
/// 9-depth profile cannot be halved four times.
struct CnnRnnConfig {
  Crop crop = Crop::corn;
  std::size_t window_years = 5;  // k; the network unrolls k + 1 steps
  std::size_t lstm_hidden = 64;
  std::size_t fc_weather_out = 60;
  std::size_t fc_soil_out = 40;
  std::size_t management_weeks = kDefaultManagementWeeks;
  std::vector<ConvLayerSpec> weather_convs{{8, 3, true}, {12, 3, true}, {16, 3, true}, {20, 3, true}};
  std::vector<ConvLayerSpec> soil_convs{{12, 3, true}, {16, 3, true}, {20, 3, false}, {24, 3, false}};
  /// Train on every unrolled step instead of only the final one.
  bool all_step_loss = false;

  /// Corn uses a 60-wide weather FC layer, soybean 40.
  static CnnRnnConfig for_crop(Crop crop);

  void validate() const;
  std::size_t steps() const { return window_years + 1; }
  std::size_t lstm_input_dim() const;
  std::size_t weather_flat_dim() const;
  std::size_t soil_flat_dim() const;
  FeatureLayout layout() const { return FeatureLayout{management_weeks}; }

  bool operator==(const CnnRnnConfig&) const = default;
};

/// Learnable tensors in a fixed, documented order.
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<ad::Tensor> tensors;

  std::size_t add(std::string name, ad::Tensor tensor);
  std::size_t size() const { return tensors.size(); }
  std::size_t scalar_count() const;
  std::size_t index_of(std::string_view name) const;
  std::vector<ad::Var> bind(ad::Tape& tape) const;

  bool operator==(const ParameterSet&) const = default;
};

/// Fixed output de-normalization: prediction = offset + scale * head output.
struct TargetScale {
  double offset = 0.0;
  double scale = 1.0;

  bool operator==(const TargetScale&) const = default;
};

struct CnnRnnModel {
  CnnRnnConfig config;
  ParameterSet params;
  /// Identity scaling until fitted on training data.
  InputPipeline inputs;
  TargetScale target;

  bool operator==(const CnnRnnModel&) const = default;
};

/// Indices into ParameterSet; each layer's bias directly follows its weight.
struct CnnRnnParamIndex {
  std::vector<std::size_t> weather_convs;
  std::size_t weather_fc = 0;
  std::vector<std::size_t> soil_convs;
  std::size_t soil_fc = 0;
  std::size_t lstm = 0;
  std::size_t head = 0;
};

CnnRnnParamIndex cnn_rnn_param_index(const CnnRnnConfig& config);

double xavier_bound(std::size_t fan_in, std::size_t fan_out);
/// fan_in * fan_out draws, uniform on +-sqrt(6 / (fan_in + fan_out)).
std::vector<double> xavier_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

/// Xavier-uniform weights, zero biases. Deterministic in `seed`.
CnnRnnModel build_cnn_rnn(const CnnRnnConfig& config, std::uint64_t seed);

/// Weather branch on a [6, 52] or [B, 6, 52] input.
ad::Var wcnn_forward(const CnnRnnModel& model, std::span<const ad::Var> params, ad::Var weather);
/// Soil branch on a [10, 9] or [B, 10, 9] input.
ad::Var scnn_forward(const CnnRnnModel& model, std::span<const ad::Var> params, ad::Var soil);

std::vector<double> wcnn_forward(const CnnRnnModel& model, const ad::Tensor& weather);
std::vector<double> scnn_forward(const CnnRnnModel& model, const ad::Tensor& soil_profile);

/// Variables produced by unrolling the network over a batch.
struct CnnRnnGraph {
  std::vector<ad::Var> params;
  /// Per step, [B, layout width] standardized inputs.
  std::vector<ad::Var> step_inputs;
  /// Per step, LSTM output [B, H].
  std::vector<ad::Var> hidden;
  /// Per step, [B] predictions in bu/acre.
  std::vector<ad::Var> predictions;
};

CnnRnnGraph cnn_rnn_graph(ad::Tape& tape, const CnnRnnModel& model, std::span<const ModelInput* const> batch);

/// k+1 per-step predictions (bu/acre) for one prepared input.
std::vector<double> cnn_rnn_forward(const CnnRnnModel& model, const ModelInput& input);
/// Standardizes with the model's pipeline, then predicts every step.
std::vector<double> cnn_rnn_forward(const CnnRnnModel& model, const SequenceSample& sample);
/// Final-step predictions for many inputs, evaluated in batches.
std::vector<double> cnn_rnn_predict(const CnnRnnModel& model, std::span<const ModelInput> inputs);

// ---------------------------------------------------------------------------
// Deep fully connected baseline: one input layer followed by residual blocks
// of two layers each; every hidden layer is affine -> batch norm -> ReLU, and
// a block adds its input before the second ReLU.

struct DfnnConfig {
  std::size_t input_dim = 0;
  std::size_t hidden_layers = 9;
  std::size_t width = 50;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  void validate() const;
  bool operator==(const DfnnConfig&) const = default;
};

struct DfnnModel {
  DfnnConfig config;
  ParameterSet params;
  std::vector<std::vector<double>> running_mean;
  std::vector<std::vector<double>> running_var;
  InputPipeline inputs;
  TargetScale target;

  bool operator==(const DfnnModel&) const = default;
};

DfnnModel build_dfnn(const DfnnConfig& config, std::uint64_t seed);

/// x: [B, input_dim]. In training mode batch statistics are used and, when
/// `stats` is given, reported per hidden layer. Returns [B] predictions.
ad::Var dfnn_graph(const DfnnModel& model, std::span<const ad::Var> params, ad::Var x, bool training_mode,
                   std::vector<ad::BatchNormStats>* stats = nullptr);

double dfnn_forward(const DfnnModel& model, std::span<const double> features, bool training_mode);
std::vector<double> dfnn_predict(const DfnnModel& model, std::span<const std::vector<double>> rows);

}  // namespace yieldnet
