#include "yieldnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "yieldnet/error.hpp"
#include "yieldnet/log.hpp"

namespace yieldnet {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

constexpr std::array<std::string_view, kWeatherVars> kWeatherNames = {
    "precipitation", "solar_radiation", "snow_water_equivalent",
    "max_temperature", "min_temperature", "vapor_pressure"};

constexpr std::array<std::string_view, kSoilVars> kSoilNames = {
    "wet_bulk_density", "dry_bulk_density", "clay_pct", "awc_upper", "awc_lower",
    "hydraulic_conductivity", "organic_matter_pct", "ph", "sand_pct", "sat_water_content"};

constexpr std::array<std::string_view, kSoilSurface> kSurfaceNames = {
    "slope_pct", "nccpi_corn", "nccpi_all", "root_zone_depth"};

constexpr std::array<std::string_view, kSoilDepths> kDepthLabels = {
    "0-5cm", "5-10cm", "10-15cm", "15-30cm", "30-45cm", "45-60cm", "60-80cm", "80-100cm", "100-120cm"};

double sorted_mean(std::vector<std::pair<int, double>> keyed) {
  std::sort(keyed.begin(), keyed.end());
  double total = 0.0;
  for (const auto& [key, value] : keyed) total += value;
  return total / static_cast<double>(keyed.size());
}

}  // namespace

std::string_view crop_name(Crop crop) { return crop == Crop::corn ? "corn" : "soybean"; }

Crop parse_crop(std::string_view text) {
  if (text == "corn") return Crop::corn;
  if (text == "soybean") return Crop::soybean;
  throw ContractViolation("unknown crop '" + std::string(text) + "' (expected corn or soybean)");
}

std::string_view weather_variable_name(std::size_t var) { return kWeatherNames.at(var); }
std::string_view soil_variable_name(std::size_t var) { return kSoilNames.at(var); }
std::string_view soil_surface_name(std::size_t var) { return kSurfaceNames.at(var); }
std::string_view soil_depth_label(std::size_t depth) { return kDepthLabels.at(depth); }

CountyYearRecord CountyYearRecord::blank(int county, int state, int year, Crop crop,
                                         std::size_t management_weeks) {
  CountyYearRecord r;
  r.county_id = county;
  r.state_id = state;
  r.year = year;
  r.crop = crop;
  r.weather.assign(kWeatherVars * kWeeks, kMissing);
  r.soil_profile.assign(kSoilVars * kSoilDepths, kMissing);
  r.soil_surface.assign(kSoilSurface, kMissing);
  r.management.assign(management_weeks, kMissing);
  r.soil_imputed.assign(kSoilVars * kSoilDepths, 0);
  r.surface_imputed.assign(kSoilSurface, 0);
  r.management_imputed.assign(management_weeks, 0);
  return r;
}

std::vector<double> weekly_average(std::span<const double> daily) {
  require(daily.size() == 365 || daily.size() == 366,
          "weekly_average expects 365 or 366 daily values, got " + std::to_string(daily.size()));
  std::vector<double> weeks(kWeeks, 0.0);
  for (std::size_t w = 0; w < kWeeks; ++w) {
    const std::size_t begin = 7 * w;
    const std::size_t end = w + 1 == kWeeks ? daily.size() : begin + 7;
    double total = 0.0;
    for (std::size_t d = begin; d < end; ++d) {
      require(std::isfinite(daily[d]), "weekly_average input must be finite");
      total += daily[d];
    }
    weeks[w] = total / static_cast<double>(end - begin);
  }
  return weeks;
}

std::vector<std::uint8_t> impute_column_mean(std::span<double> column, const std::string& variable) {
  double total = 0.0;
  std::size_t observed = 0;
  for (double v : column) {
    if (!std::isnan(v)) {
      total += v;
      ++observed;
    }
  }
  std::vector<std::uint8_t> filled(column.size(), 0);
  if (observed == column.size()) return filled;
  if (observed == 0) throw DataError("cannot impute '" + variable + "': no observed values");
  const double mean = total / static_cast<double>(observed);
  for (std::size_t i = 0; i < column.size(); ++i) {
    if (std::isnan(column[i])) {
      column[i] = mean;
      filled[i] = 1;
    }
  }
  return filled;
}

void impute_soil(std::vector<CountyYearRecord>& records) {
  if (records.empty()) return;
  // Canonical soil per county: the first record seen for that county.
  std::map<int, std::size_t> first;
  for (std::size_t i = 0; i < records.size(); ++i) first.try_emplace(records[i].county_id, i);

  auto impute_field = [&](auto member, auto flags, std::size_t width, auto name_of) {
    for (std::size_t j = 0; j < width; ++j) {
      std::vector<double> column;
      column.reserve(first.size());
      for (const auto& [county, idx] : first) column.push_back((records[idx].*member)[j]);
      const auto filled = impute_column_mean(column, name_of(j));
      std::size_t c = 0;
      std::map<int, std::pair<double, std::uint8_t>> by_county;
      for (const auto& [county, idx] : first) {
        by_county[county] = {column[c], filled[c]};
        ++c;
      }
      for (auto& r : records) {
        const auto& [value, was_filled] = by_county.at(r.county_id);
        if (std::isnan((r.*member)[j]) || was_filled) {
          (r.*member)[j] = value;
          if (was_filled) (r.*flags)[j] = 1;
        }
      }
    }
  };

  impute_field(&CountyYearRecord::soil_profile, &CountyYearRecord::soil_imputed, kSoilVars * kSoilDepths,
               [](std::size_t j) {
                 return "soil " + std::string(soil_variable_name(j / kSoilDepths)) + " at " +
                        std::string(soil_depth_label(j % kSoilDepths));
               });
  impute_field(&CountyYearRecord::soil_surface, &CountyYearRecord::surface_imputed, kSoilSurface,
               [](std::size_t j) { return "soil surface " + std::string(soil_surface_name(j)); });
}

void impute_management(std::vector<CountyYearRecord>& records) {
  if (records.empty()) return;
  const std::size_t weeks = records.front().management.size();
  // (year, state) -> canonical record index.
  std::map<std::pair<int, int>, std::size_t> first;
  for (std::size_t i = 0; i < records.size(); ++i) {
    require(records[i].management.size() == weeks, "records disagree on management length");
    first.try_emplace({records[i].year, records[i].state_id}, i);
  }
  std::map<std::pair<int, int>, std::vector<double>> completed;
  std::map<std::pair<int, int>, std::vector<std::uint8_t>> filled_flags;

  auto it = first.begin();
  while (it != first.end()) {
    const int year = it->first.first;
    auto year_end = it;
    while (year_end != first.end() && year_end->first.first == year) ++year_end;
    for (auto s = it; s != year_end; ++s) {
      completed[s->first] = records[s->second].management;
      filled_flags[s->first].assign(weeks, 0);
    }
    for (std::size_t w = 0; w < weeks; ++w) {
      std::vector<double> column;
      for (auto s = it; s != year_end; ++s) column.push_back(completed[s->first][w]);
      const auto filled = impute_column_mean(
          column, "management week " + std::to_string(w + 1) + " in year " + std::to_string(year));
      std::size_t c = 0;
      for (auto s = it; s != year_end; ++s, ++c) {
        completed[s->first][w] = column[c];
        filled_flags[s->first][w] = filled[c];
      }
    }
    it = year_end;
  }

  for (auto& r : records) {
    const std::pair<int, int> key{r.year, r.state_id};
    const auto& values = completed.at(key);
    const auto& flags = filled_flags.at(key);
    for (std::size_t w = 0; w < weeks; ++w) {
      if (std::isnan(r.management[w]) || flags[w]) {
        r.management[w] = values[w];
        if (flags[w]) r.management_imputed[w] = 1;
      }
    }
  }
}

std::map<int, double> compute_avg_yields(std::span<const CountyYearRecord> records, Crop crop) {
  std::map<int, std::vector<std::pair<int, double>>> by_year;
  for (const auto& r : records) {
    if (r.crop == crop && r.yield.has_value()) by_year[r.year].emplace_back(r.county_id, *r.yield);
  }
  std::map<int, double> averages;
  for (auto& [year, yields] : by_year) averages[year] = sorted_mean(std::move(yields));
  return averages;
}

AssemblyResult assemble_sequences(std::span<const CountyYearRecord> records, Crop crop, std::size_t k,
                                  const std::set<int>& target_years, Phase phase,
                                  const std::map<int, double>& avg_yields) {
  std::map<int, std::map<int, const CountyYearRecord*>> by_county;
  for (const auto& r : records) {
    if (r.crop != crop) continue;
    auto [pos, inserted] = by_county[r.county_id].emplace(r.year, &r);
    require(inserted, "duplicate record for county " + std::to_string(r.county_id) + " year " +
                          std::to_string(r.year));
  }

  AssemblyResult result;
  const int span_years = static_cast<int>(k);
  for (const auto& [county, years] : by_county) {
    for (int t : target_years) {
      auto target_it = years.find(t);
      if (target_it == years.end()) continue;  // county has no record for this year at all
      bool complete = true;
      SequenceSample sample;
      sample.county_id = county;
      sample.state_id = target_it->second->state_id;
      sample.target_year = t;
      sample.crop = crop;
      for (int y = t - span_years; y <= t && complete; ++y) {
        auto rec = years.find(y);
        if (rec == years.end() || rec->second->weather.size() != kWeatherVars * kWeeks) {
          complete = false;
          break;
        }
        const int avg_year = (y == t && phase == Phase::test) ? t - 1 : y;
        auto avg = avg_yields.find(avg_year);
        if (avg == avg_yields.end()) {
          complete = false;
          break;
        }
        sample.window.push_back(*rec->second);
        sample.avg_yield_input.push_back(avg->second);
      }
      if (complete && phase == Phase::train && !target_it->second->yield.has_value()) complete = false;
      if (!complete) {
        ++result.skipped;
        continue;
      }
      sample.final_avg_substituted = phase == Phase::test;
      sample.target = target_it->second->yield;
      result.samples.push_back(std::move(sample));
    }
  }
  return result;
}

bool substitute_weather(SequenceSample& sample, const CountyYearRecord* source, const std::set<int>& weeks) {
  if (source == nullptr) {
    log_warning("no replacement weather for county " + std::to_string(sample.county_id) +
                "; sample left unchanged");
    return false;
  }
  require(source->county_id == sample.county_id, "replacement weather belongs to a different county");
  require(!sample.window.empty(), "sample has an empty window");
  auto& weather = sample.window.back().weather;
  for (int week : weeks) {
    require(week >= 1 && week <= static_cast<int>(kWeeks), "substitution week out of range 1..52");
    for (std::size_t v = 0; v < kWeatherVars; ++v) {
      const std::size_t idx = v * kWeeks + static_cast<std::size_t>(week - 1);
      weather[idx] = source->weather[idx];
    }
  }
  return true;
}

std::vector<YearSummary> summarize_dataset(std::span<const CountyYearRecord> records,
                                           const std::set<int>& years) {
  require(!records.empty(), "summarize_dataset requires records");
  std::map<std::pair<int, int>, std::vector<std::pair<int, double>>> groups;
  for (const auto& r : records) {
    if (!years.empty() && !years.contains(r.year)) continue;
    auto& group = groups[{static_cast<int>(r.crop), r.year}];
    if (r.yield.has_value()) group.emplace_back(r.county_id, *r.yield);
  }
  std::vector<YearSummary> out;
  for (auto& [key, yields] : groups) {
    YearSummary s;
    s.crop = static_cast<Crop>(key.first);
    s.year = key.second;
    s.count = yields.size();
    if (!yields.empty()) {
      std::sort(yields.begin(), yields.end());
      double total = 0.0;
      for (const auto& [c, y] : yields) total += y;
      s.mean = total / static_cast<double>(yields.size());
      double sq = 0.0;
      for (const auto& [c, y] : yields) sq += (y - s.mean) * (y - s.mean);
      s.sd = std::sqrt(sq / static_cast<double>(yields.size()));
    }
    out.push_back(s);
  }
  return out;
}

RecordIndex::RecordIndex(std::span<const CountyYearRecord> records) {
  for (const auto& r : records) index_[{r.county_id, r.year, static_cast<int>(r.crop)}] = &r;
}

const CountyYearRecord* RecordIndex::find(int county, int year, Crop crop) const {
  auto it = index_.find({county, year, static_cast<int>(crop)});
  return it == index_.end() ? nullptr : it->second;
}

}  // namespace yieldnet
