#include "yieldnet/features.hpp"

#include <algorithm>
#include <cmath>

#include "yieldnet/error.hpp"

namespace yieldnet {

std::string_view feature_group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::weather: return "weather";
    case FeatureGroup::soil_depth: return "soil-depth";
    case FeatureGroup::soil_surface: return "soil-surface";
    case FeatureGroup::management: return "management";
    case FeatureGroup::avg_yield: return "avg-yield";
  }
  return "unknown";
}

FeatureGroup FeatureLayout::group_of(std::size_t feature) const {
  require(feature < size(), "feature index out of range");
  if (feature < soil_offset()) return FeatureGroup::weather;
  if (feature < surface_offset()) return FeatureGroup::soil_depth;
  if (feature < management_offset()) return FeatureGroup::soil_surface;
  if (feature < avg_yield_index()) return FeatureGroup::management;
  return FeatureGroup::avg_yield;
}

std::string FeatureLayout::describe(std::size_t feature) const {
  switch (group_of(feature)) {
    case FeatureGroup::weather: {
      const std::size_t local = feature - weather_offset();
      return std::string(weather_variable_name(local / kWeeks)) + " week " + std::to_string(local % kWeeks + 1);
    }
    case FeatureGroup::soil_depth: {
      const std::size_t local = feature - soil_offset();
      return std::string(soil_variable_name(local / kSoilDepths)) + " " +
             std::string(soil_depth_label(local % kSoilDepths));
    }
    case FeatureGroup::soil_surface:
      return std::string(soil_surface_name(feature - surface_offset()));
    case FeatureGroup::management:
      return "planted pct week " + std::to_string(feature - management_offset() + 1);
    case FeatureGroup::avg_yield:
      return "average yield input";
  }
  return {};
}

std::vector<double> flatten_record(const CountyYearRecord& record, double avg_yield_input,
                                   const FeatureLayout& layout) {
  require(record.weather.size() == FeatureLayout::weather_size, "record weather must be 6 x 52");
  require(record.soil_profile.size() == FeatureLayout::soil_size, "record soil profile must be 10 x 9");
  require(record.soil_surface.size() == FeatureLayout::surface_size, "record soil surface must have 4 values");
  require(record.management.size() == layout.management_weeks,
          "record management length " + std::to_string(record.management.size()) +
              " does not match layout " + std::to_string(layout.management_weeks));
  std::vector<double> out;
  out.reserve(layout.size());
  out.insert(out.end(), record.weather.begin(), record.weather.end());
  out.insert(out.end(), record.soil_profile.begin(), record.soil_profile.end());
  out.insert(out.end(), record.soil_surface.begin(), record.soil_surface.end());
  out.insert(out.end(), record.management.begin(), record.management.end());
  out.push_back(avg_yield_input);
  return out;
}

std::vector<double> flatten_features(const SequenceSample& sample) {
  require(!sample.window.empty() && sample.avg_yield_input.size() == sample.window.size(),
          "flatten_features requires a complete sample");
  const FeatureLayout layout{sample.target_record().management.size()};
  return flatten_record(sample.target_record(), sample.avg_yield_input.back(), layout);
}

FeatureScaler FeatureScaler::fit(std::span<const std::vector<double>> rows) {
  require(!rows.empty(), "FeatureScaler::fit requires at least one row");
  const std::size_t width = rows.front().size();
  FeatureScaler s;
  s.mean.assign(width, 0.0);
  s.scale.assign(width, 0.0);
  for (const auto& row : rows) {
    require(row.size() == width, "FeatureScaler rows differ in width");
    for (std::size_t j = 0; j < width; ++j) s.mean[j] += row[j];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : s.mean) m /= n;
  for (const auto& row : rows)
    for (std::size_t j = 0; j < width; ++j) {
      const double d = row[j] - s.mean[j];
      s.scale[j] += d * d;
    }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

FeatureScaler FeatureScaler::identity(std::size_t width) {
  FeatureScaler s;
  s.mean.assign(width, 0.0);
  s.scale.assign(width, 1.0);
  return s;
}

void FeatureScaler::transform(std::span<double> row) const {
  if (empty()) return;
  require(row.size() == mean.size(), "scaler width does not match row");
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
}

void apply_mask(ModelInput& input, std::span<const std::uint8_t> mask, const FeatureLayout& layout) {
  require(input.width == layout.size(), "model input width does not match the feature layout");
  require(mask.size() == layout.size(), "mask size " + std::to_string(mask.size()) +
                                            " does not match feature count " + std::to_string(layout.size()));
  const std::size_t avg = layout.avg_yield_index();
  for (std::size_t s = 0; s < input.steps; ++s) {
    auto row = input.step(s);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!mask[j] && j != avg) row[j] = 0.0;
    }
  }
}

std::vector<std::uint8_t> group_mask(const FeatureLayout& layout, std::span<const FeatureGroup> keep) {
  std::vector<std::uint8_t> mask(layout.size(), 0);
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const FeatureGroup g = layout.group_of(j);
    mask[j] = g == FeatureGroup::avg_yield || std::find(keep.begin(), keep.end(), g) != keep.end();
  }
  return mask;
}

InputPipeline InputPipeline::fit(std::span<const SequenceSample> samples, const FeatureLayout& layout) {
  require(!samples.empty(), "input statistics need at least one training sample");
  std::vector<std::vector<double>> rows;
  for (const auto& sample : samples) {
    for (std::size_t s = 0; s < sample.window.size(); ++s) {
      rows.push_back(flatten_record(sample.window[s], sample.avg_yield_input[s], layout));
    }
  }
  InputPipeline pipeline;
  pipeline.layout = layout;
  pipeline.scaler = FeatureScaler::fit(rows);
  return pipeline;
}

ModelInput InputPipeline::prepare(const SequenceSample& sample) const {
  require(!sample.window.empty() && sample.avg_yield_input.size() == sample.window.size(),
          "sample window is incomplete");
  ModelInput input;
  input.steps = sample.window.size();
  input.width = layout.size();
  input.values.reserve(input.steps * input.width);
  for (std::size_t s = 0; s < input.steps; ++s) {
    auto row = flatten_record(sample.window[s], sample.avg_yield_input[s], layout);
    scaler.transform(row);
    input.values.insert(input.values.end(), row.begin(), row.end());
  }
  if (!keep.empty()) apply_mask(input, keep, layout);
  return input;
}

std::vector<ModelInput> InputPipeline::prepare(std::span<const SequenceSample> samples) const {
  std::vector<ModelInput> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(prepare(s));
  return out;
}

std::vector<double> InputPipeline::prepare_flat(const SequenceSample& sample) const {
  auto row = flatten_record(sample.target_record(), sample.avg_yield_input.back(), layout);
  scaler.transform(row);
  if (!keep.empty()) {
    const std::size_t avg = layout.avg_yield_index();
    for (std::size_t j = 0; j < row.size(); ++j)
      if (!keep[j] && j != avg) row[j] = 0.0;
  }
  return row;
}

}  // namespace yieldnet
