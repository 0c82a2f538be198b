#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "yieldnet/baselines.hpp"
#include "yieldnet/model.hpp"
#include "yieldnet/training.hpp"

namespace yieldnet {

enum class ModelKind { cnn_rnn, dfnn, rf, lasso, average };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Baselines bundled with the standardization they were fitted with.
struct LassoPredictor {
  InputPipeline inputs;
  LassoModel model;
  bool operator==(const LassoPredictor&) const = default;
};

struct ForestPredictor {
  InputPipeline inputs;
  ForestModel model;
  bool operator==(const ForestPredictor&) const = default;
};

struct AveragePredictor {
  AverageModel model;
  bool operator==(const AveragePredictor&) const = default;
};

using TrainedModel = std::variant<CnnRnnModel, DfnnModel, LassoPredictor, ForestPredictor, AveragePredictor>;

ModelKind kind_of(const TrainedModel& model);

struct ModelSettings {
  CnnRnnConfig network = CnnRnnConfig::for_crop(Crop::corn);
  TrainConfig train;
  ForestConfig forest;
  /// Candidate L1 weights; the one with the lowest error on the last
  /// training year (fitted on the years before it) is refitted on everything.
  std::vector<double> lasso_grid{0.3, 0.4, 0.5};
  /// Feature keep-mask for the networks; empty keeps everything.
  std::vector<std::uint8_t> keep;
  /// Model initialization and sampling seed.
  std::uint64_t seed = 42;
};

struct FitResult {
  TrainedModel model;
  /// Loss curve of the neural models; empty for the baselines.
  TrainReport report;
  /// Chosen L1 weight for LASSO, 0 otherwise.
  double lasso_lambda = 0.0;
};

FitResult fit_model(ModelKind kind, std::span<const SequenceSample> train, const ModelSettings& settings,
                    std::span<const SequenceSample> monitor = {});

/// Final-step prediction (bu/acre) for every sample.
std::vector<double> predict(const TrainedModel& model, std::span<const SequenceSample> samples);

}  // namespace yieldnet
