#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yieldnet/data.hpp"

namespace yieldnet {

enum class FeatureGroup { weather, soil_depth, soil_surface, management, avg_yield };

std::string_view feature_group_name(FeatureGroup group);

/// Flat per-year feature order shared by the baselines, the network inputs,
/// attribution and masking:
///   weather (var-major, 6 x 52) | soil profile (var-major, 10 x 9) |
///   soil surface (4) | management (m weeks) | average-yield input (1)
struct FeatureLayout {
  std::size_t management_weeks = kDefaultManagementWeeks;

  static constexpr std::size_t weather_size = kWeatherVars * kWeeks;
  static constexpr std::size_t soil_size = kSoilVars * kSoilDepths;
  static constexpr std::size_t surface_size = kSoilSurface;

  static constexpr std::size_t weather_offset() { return 0; }
  static constexpr std::size_t soil_offset() { return weather_size; }
  static constexpr std::size_t surface_offset() { return weather_size + soil_size; }
  static constexpr std::size_t management_offset() { return weather_size + soil_size + surface_size; }
  std::size_t avg_yield_index() const { return management_offset() + management_weeks; }
  std::size_t size() const { return avg_yield_index() + 1; }

  FeatureGroup group_of(std::size_t feature) const;
  /// Human-readable label such as "precipitation week 30".
  std::string describe(std::size_t feature) const;

  bool operator==(const FeatureLayout&) const = default;
};

/// One year's features in layout order.
std::vector<double> flatten_record(const CountyYearRecord& record, double avg_yield_input,
                                   const FeatureLayout& layout);

/// Target-year features of a sample (the baselines' input encoding).
std::vector<double> flatten_features(const SequenceSample& sample);

/// Per-feature z-scoring fitted on training rows only.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  /// Population statistics over `rows`; a zero spread gets scale 1.
  static FeatureScaler fit(std::span<const std::vector<double>> rows);
  static FeatureScaler identity(std::size_t width);

  bool empty() const { return mean.empty(); }
  void transform(std::span<double> row) const;

  bool operator==(const FeatureScaler&) const = default;
};

/// Standardized network input: (k+1) steps x layout.size(), row-major.
struct ModelInput {
  std::size_t steps = 0;
  std::size_t width = 0;
  std::vector<double> values;

  std::span<const double> step(std::size_t s) const { return {values.data() + s * width, width}; }
  std::span<double> step(std::size_t s) { return {values.data() + s * width, width}; }
};

/// Zeroes (the standardized training mean) every feature whose mask entry is
/// 0, at every step. The average-yield input is never masked.
void apply_mask(ModelInput& input, std::span<const std::uint8_t> mask, const FeatureLayout& layout);

/// Mask keeping only the named groups (plus the average-yield input).
std::vector<std::uint8_t> group_mask(const FeatureLayout& layout, std::span<const FeatureGroup> keep);

/// Raw sample -> standardized, masked network input.
struct InputPipeline {
  FeatureLayout layout;
  FeatureScaler scaler;
  /// Empty means keep everything.
  std::vector<std::uint8_t> keep;

  /// Fits the scaler over every step of every training sample.
  static InputPipeline fit(std::span<const SequenceSample> samples, const FeatureLayout& layout);

  ModelInput prepare(const SequenceSample& sample) const;
  std::vector<ModelInput> prepare(std::span<const SequenceSample> samples) const;
  /// Standardized, masked target-year features (baseline encoding).
  std::vector<double> prepare_flat(const SequenceSample& sample) const;

  bool operator==(const InputPipeline&) const = default;
};

}  // namespace yieldnet
