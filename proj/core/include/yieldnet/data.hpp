#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace yieldnet {

enum class Crop { corn, soybean };

std::string_view crop_name(Crop crop);
Crop parse_crop(std::string_view text);

inline constexpr std::size_t kWeatherVars = 6;
inline constexpr std::size_t kWeeks = 52;
inline constexpr std::size_t kSoilVars = 10;
inline constexpr std::size_t kSoilDepths = 9;
inline constexpr std::size_t kSoilSurface = 4;
inline constexpr std::size_t kDefaultManagementWeeks = 15;

// Weather variable order: precipitation, solar radiation, snow water
// equivalent, maximum temperature, minimum temperature, vapor pressure.
inline constexpr std::size_t kPrecipitation = 0;
inline constexpr std::size_t kSnowWater = 2;
inline constexpr std::size_t kMaxTemperature = 3;

std::string_view weather_variable_name(std::size_t var);
std::string_view soil_variable_name(std::size_t var);
std::string_view soil_surface_name(std::size_t var);
std::string_view soil_depth_label(std::size_t depth);

/// One county-crop-year observation. Arrays are variable-major
/// (weather[var * 52 + week], soil_profile[var * 9 + depth]). Missing
/// soil and management entries are NaN until imputed.
struct CountyYearRecord {
  int county_id = 0;
  int state_id = 0;
  int year = 0;
  Crop crop = Crop::corn;
  std::optional<double> yield;
  std::vector<double> weather;
  std::vector<double> soil_profile;
  std::vector<double> soil_surface;
  std::vector<double> management;
  std::vector<std::uint8_t> soil_imputed;
  std::vector<std::uint8_t> surface_imputed;
  std::vector<std::uint8_t> management_imputed;

  static CountyYearRecord blank(int county, int state, int year, Crop crop, std::size_t management_weeks);

  double weather_at(std::size_t var, std::size_t week) const { return weather[var * kWeeks + week]; }
};

enum class Phase { train, test };

/// A (k+1)-year window ending at the target year, with the per-step
/// average-yield input. In the test phase the final step carries the
/// previous year's average in place of the unknown current one.
struct SequenceSample {
  int county_id = 0;
  int state_id = 0;
  int target_year = 0;
  Crop crop = Crop::corn;
  std::vector<CountyYearRecord> window;
  std::vector<double> avg_yield_input;
  bool final_avg_substituted = false;
  std::optional<double> target;

  const CountyYearRecord& target_record() const { return window.back(); }
};

/// Daily series of 365 or 366 values to 52 weekly means. Weeks 1-51 cover
/// seven days each; week 52 absorbs the remaining 8 or 9 days.
std::vector<double> weekly_average(std::span<const double> daily);

/// Fills NaN entries of `column` with the mean of the observed entries.
/// Returns a flag per entry marking the filled cells. Throws DataError naming
/// `variable` when nothing is observed.
std::vector<std::uint8_t> impute_column_mean(std::span<double> column, const std::string& variable);

/// Missing soil profile/surface entries take the mean of that variable and
/// depth over the other counties. Soil is static per county.
void impute_soil(std::vector<CountyYearRecord>& records);

/// Missing management entries take the mean of the same week over the other
/// states within the same year.
void impute_management(std::vector<CountyYearRecord>& records);

/// Year -> mean yield over counties with an observed yield for `crop`.
std::map<int, double> compute_avg_yields(std::span<const CountyYearRecord> records, Crop crop);

struct AssemblyResult {
  std::vector<SequenceSample> samples;
  std::size_t skipped = 0;
};

/// One sample per county and target year whose window of k+1 consecutive
/// years is present. Train-phase samples need an observed target yield;
/// test-phase samples may lack one.
AssemblyResult assemble_sequences(std::span<const CountyYearRecord> records, Crop crop, std::size_t k,
                                  const std::set<int>& target_years, Phase phase,
                                  const std::map<int, double>& avg_yields);

/// Replaces the target-year weather at the given 1-based weeks with the
/// matching weeks of `source`. Returns false (and leaves the sample alone)
/// when `source` is absent.
bool substitute_weather(SequenceSample& sample, const CountyYearRecord* source, const std::set<int>& weeks);

struct YearSummary {
  Crop crop = Crop::corn;
  int year = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

/// Population mean and standard deviation of observed yields per (crop, year).
std::vector<YearSummary> summarize_dataset(std::span<const CountyYearRecord> records,
                                           const std::set<int>& years);

/// Index of the record for a (county, year, crop), built once for lookups.
class RecordIndex {
 public:
  explicit RecordIndex(std::span<const CountyYearRecord> records);
  const CountyYearRecord* find(int county, int year, Crop crop) const;

 private:
  std::map<std::tuple<int, int, int>, const CountyYearRecord*> index_;
};

}  // namespace yieldnet
