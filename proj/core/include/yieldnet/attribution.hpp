#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yieldnet/features.hpp"
#include "yieldnet/model.hpp"

namespace yieldnet {

/// Guided-backpropagation importance of every final-step input feature.
struct AttributionReport {
  FeatureLayout layout;
  /// Mean over samples of |d seed / d input| per feature; >= 0.
  std::vector<double> raw;
  /// raw divided by the maximum of its group; groups that are all zero stay zero.
  std::vector<double> normalized;
  std::vector<std::uint8_t> seed;
  std::size_t samples = 0;
  bool from_head = false;

  FeatureGroup group(std::size_t feature) const { return layout.group_of(feature); }
};

/// 1 where the mean final-step LSTM output over `inputs` is strictly positive.
std::vector<std::uint8_t> select_seed_neurons(const CnnRnnModel& model, std::span<const ModelInput> inputs);

struct AttributionOptions {
  /// Seed the scalar prediction instead of the LSTM output.
  bool from_head = false;
  /// Samples per tape; results do not depend on it.
  std::size_t batch = 64;
};

AttributionReport guided_attribute(const CnnRnnModel& model, std::span<const ModelInput> inputs,
                                   const AttributionOptions& options = {});
AttributionReport guided_attribute(const CnnRnnModel& model, std::span<const SequenceSample> samples,
                                   const AttributionOptions& options = {});

/// Divides each group by its own maximum.
std::vector<double> normalize_by_group(std::span<const double> raw, const FeatureLayout& layout);

/// Keeps the ceil(fraction * p) features with the largest raw importance;
/// ties go to the lowest index.
std::vector<std::uint8_t> select_top_fraction(const AttributionReport& report, double fraction);
std::vector<std::uint8_t> select_top_fraction(std::span<const double> importance, double fraction);

/// Indices of the `count` most important features of one group, best first.
std::vector<std::size_t> top_features(const AttributionReport& report, FeatureGroup group, std::size_t count);

/// feature_id, group, description, raw_importance, normalized_importance
std::string attribution_csv(const AttributionReport& report, std::string_view comment = {});

}  // namespace yieldnet
