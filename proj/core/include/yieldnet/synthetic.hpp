#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "yieldnet/data.hpp"

namespace yieldnet {

/// Generator settings. Yield follows
///   base + trend * (year - start) + alpha * mean(precip, precip weeks)
///        + beta * q + gamma * relu(mean(tmax, heat weeks) - heat_threshold) + noise
/// where q ~ N(0, 1) is a per-county soil latent that reaches the soil
/// features only through a saturating transform.
struct SyntheticSpec {
  std::size_t counties = 60;
  std::size_t states = 4;
  int start_year = 1980;
  int end_year = 2000;
  std::uint64_t seed = 42;
  Crop crop = Crop::corn;
  std::size_t management_weeks = kDefaultManagementWeeks;

  double base = 60.0;
  double trend = 2.0;
  double alpha = 20.0;
  double beta = 12.0;
  double gamma = -10.0;
  double heat_threshold = 28.0;
  double noise_sd = 3.0;
  /// 1-based inclusive week ranges.
  int precip_first_week = 26;
  int precip_last_week = 32;
  int heat_first_week = 28;
  int heat_last_week = 34;

  /// Fraction of soil cells and management cells written as missing.
  double soil_missing_rate = 0.0;
  double management_missing_rate = 0.0;

  void validate() const;
  std::size_t years() const { return static_cast<std::size_t>(end_year - start_year + 1); }
};

struct SyntheticDataset {
  SyntheticSpec spec;
  /// One record per (county, year), ordered by county then year.
  std::vector<CountyYearRecord> records;
  /// Soil latent per county id (ids are 1-based; index 0 unused).
  std::vector<double> soil_latent;
};

/// Deterministic in spec.seed. Requires at least 10 counties and 8 years.
SyntheticDataset gen_synthetic(const SyntheticSpec& spec);

/// The generator spec plus the causal structure as a JSON document.
std::string synthetic_metadata_json(const SyntheticDataset& dataset);

/// Inverse of the spec half of synthetic_metadata_json.
SyntheticSpec parse_synthetic_metadata(const std::string& json_text);

}  // namespace yieldnet
