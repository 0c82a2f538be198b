#include "yieldnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"

#include "yieldnet/error.hpp"
#include "yieldnet/rng.hpp"

namespace yieldnet {
namespace {

using json = nlohmann::ordered_json;

// Stream tags for mix_seed.
enum Stream : std::uint64_t {
  kLatentStream = 1,
  kSoilStream,
  kCountyWeatherStream,
  kYearAnomalyStream,
  kWeatherNoiseStream,
  kManagementStream,
  kYieldNoiseStream,
  kMissingStream,
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Climatology {
  double mean;
  double amplitude;
  double noise_sd;
  double county_sd;  // static per-county offset
  double year_sd;    // anomaly shared by all counties in a year
};

// Seasonal cycle peaks at week 26. Precipitation and maximum temperature
// carry no county offsets, so their county-level variation is pure noise.
constexpr Climatology kClimate[kWeatherVars] = {
    {2.6, 0.8, 1.0, 0.0, 0.25},       // precipitation, mm/day
    {250.0, 110.0, 30.0, 10.0, 8.0},  // solar radiation, W/m^2
    {12.0, -20.0, 6.0, 3.0, 3.0},     // snow water equivalent, kg/m^2
    {15.0, 14.0, 2.5, 0.0, 0.8},      // maximum temperature, C
    {4.0, 12.0, 1.5, 0.5, 0.6},       // minimum temperature, C
    {1100.0, 700.0, 120.0, 50.0, 40.0},  // vapor pressure, Pa
};

double seasonal(std::size_t week) {
  return std::sin(2.0 * std::numbers::pi * (static_cast<double>(week) - 13.0) / static_cast<double>(kWeeks));
}

double window_mean(const CountyYearRecord& r, std::size_t var, int first, int last) {
  double total = 0.0;
  for (int w = first; w <= last; ++w) total += r.weather_at(var, static_cast<std::size_t>(w - 1));
  return total / static_cast<double>(last - first + 1);
}

double soil_signal(double q) { return std::tanh(1.5 * q); }

}  // namespace

void SyntheticSpec::validate() const {
  require(counties >= 10, "gen_synthetic needs at least 10 counties");
  require(states >= 1 && states <= counties, "state count must be between 1 and the county count");
  require(end_year - start_year + 1 >= 8, "gen_synthetic needs at least 8 years");
  require(management_weeks >= 1, "management weeks must be positive");
  require(noise_sd >= 0.0, "noise sd must be non-negative");
  require(precip_first_week >= 1 && precip_first_week <= precip_last_week && precip_last_week <= 52,
          "precipitation weeks must lie within 1..52");
  require(heat_first_week >= 1 && heat_first_week <= heat_last_week && heat_last_week <= 52,
          "heat weeks must lie within 1..52");
  require(soil_missing_rate >= 0.0 && soil_missing_rate < 1.0, "soil missing rate must be in [0, 1)");
  require(management_missing_rate >= 0.0 && management_missing_rate < 1.0,
          "management missing rate must be in [0, 1)");
}

SyntheticDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticDataset out;
  out.spec = spec;
  const std::size_t n = spec.counties;
  const std::size_t years = spec.years();

  Rng latent_rng(mix_seed(spec.seed, kLatentStream));
  out.soil_latent.assign(n + 1, 0.0);
  for (std::size_t c = 1; c <= n; ++c) out.soil_latent[c] = latent_rng.normal();

  // Static soil per county.
  Rng soil_rng(mix_seed(spec.seed, kSoilStream));
  std::vector<double> var_base(kSoilVars), var_scale(kSoilVars), var_depth_slope(kSoilVars);
  for (std::size_t v = 0; v < kSoilVars; ++v) {
    var_base[v] = soil_rng.uniform(0.5, 50.0);
    var_scale[v] = var_base[v] * soil_rng.uniform(0.2, 0.5) * (soil_rng.uniform() < 0.5 ? -1.0 : 1.0);
    var_depth_slope[v] = soil_rng.uniform(-0.06, 0.06);
  }
  std::vector<std::vector<double>> soil(n + 1), surface(n + 1);
  for (std::size_t c = 1; c <= n; ++c) {
    const double s = soil_signal(out.soil_latent[c]);
    soil[c].resize(kSoilVars * kSoilDepths);
    for (std::size_t v = 0; v < kSoilVars; ++v) {
      for (std::size_t d = 0; d < kSoilDepths; ++d) {
        const double depth_factor = 1.0 + var_depth_slope[v] * static_cast<double>(d);
        soil[c][v * kSoilDepths + d] = depth_factor * (var_base[v] + var_scale[v] * s) +
                                       soil_rng.normal(0.0, 0.02 * std::abs(var_scale[v]));
      }
    }
    surface[c] = {soil_rng.uniform(0.0, 8.0), 0.5 + 0.3 * s + soil_rng.normal(0.0, 0.01),
                  0.45 + 0.25 * s + soil_rng.normal(0.0, 0.01), 100.0 + 30.0 * s + soil_rng.normal(0.0, 3.0)};
  }

  Rng county_weather_rng(mix_seed(spec.seed, kCountyWeatherStream));
  std::vector<double> county_offset((n + 1) * kWeatherVars, 0.0);
  for (std::size_t c = 1; c <= n; ++c)
    for (std::size_t v = 0; v < kWeatherVars; ++v)
      county_offset[c * kWeatherVars + v] = county_weather_rng.normal(0.0, kClimate[v].county_sd);

  Rng anomaly_rng(mix_seed(spec.seed, kYearAnomalyStream));
  std::vector<double> year_anomaly(years * kWeatherVars);
  for (std::size_t y = 0; y < years; ++y)
    for (std::size_t v = 0; v < kWeatherVars; ++v)
      year_anomaly[y * kWeatherVars + v] = anomaly_rng.normal(0.0, kClimate[v].year_sd);

  // Cumulative planting progress per (state, year): a logistic curve in the week index.
  Rng management_rng(mix_seed(spec.seed, kManagementStream));
  std::vector<std::vector<double>> management(spec.states * years);
  for (std::size_t st = 0; st < spec.states; ++st) {
    for (std::size_t y = 0; y < years; ++y) {
      const double midpoint = 0.45 * static_cast<double>(spec.management_weeks) + management_rng.normal(0.0, 1.2);
      const double spread = management_rng.uniform(0.9, 1.6);
      auto& curve = management[st * years + y];
      curve.resize(spec.management_weeks);
      for (std::size_t w = 0; w < spec.management_weeks; ++w) {
        curve[w] = 100.0 / (1.0 + std::exp(-(static_cast<double>(w) - midpoint) / spread));
      }
    }
  }

  Rng missing_rng(mix_seed(spec.seed, kMissingStream));
  if (spec.soil_missing_rate > 0.0) {
    for (std::size_t c = 1; c <= n; ++c)
      for (double& cell : soil[c])
        if (missing_rng.uniform() < spec.soil_missing_rate) cell = kNaN;
  }
  if (spec.management_missing_rate > 0.0) {
    for (auto& curve : management)
      for (double& cell : curve)
        if (missing_rng.uniform() < spec.management_missing_rate) cell = kNaN;
  }

  Rng noise_rng(mix_seed(spec.seed, kWeatherNoiseStream));
  Rng yield_rng(mix_seed(spec.seed, kYieldNoiseStream));
  out.records.reserve(n * years);
  for (std::size_t c = 1; c <= n; ++c) {
    const int state = static_cast<int>((c - 1) % spec.states) + 1;
    for (std::size_t y = 0; y < years; ++y) {
      const int year = spec.start_year + static_cast<int>(y);
      auto r = CountyYearRecord::blank(static_cast<int>(c), state, year, spec.crop, spec.management_weeks);
      for (std::size_t v = 0; v < kWeatherVars; ++v) {
        const Climatology& cl = kClimate[v];
        const double shift = county_offset[c * kWeatherVars + v] + year_anomaly[y * kWeatherVars + v];
        for (std::size_t w = 0; w < kWeeks; ++w) {
          double value = cl.mean + cl.amplitude * seasonal(w) + shift + noise_rng.normal(0.0, cl.noise_sd);
          if (v == kPrecipitation || v == kSnowWater) value = std::max(0.0, value);
          r.weather[v * kWeeks + w] = value;
        }
      }
      r.soil_profile = soil[c];
      r.soil_surface = surface[c];
      r.management = management[static_cast<std::size_t>(state - 1) * years + y];

      const double precip = window_mean(r, kPrecipitation, spec.precip_first_week, spec.precip_last_week);
      const double heat = window_mean(r, kMaxTemperature, spec.heat_first_week, spec.heat_last_week);
      const double noise = yield_rng.normal(0.0, 1.0) * spec.noise_sd;
      r.yield = spec.base + spec.trend * static_cast<double>(year - spec.start_year) + spec.alpha * precip +
                spec.beta * out.soil_latent[c] + spec.gamma * std::max(0.0, heat - spec.heat_threshold) + noise;
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

std::string synthetic_metadata_json(const SyntheticDataset& dataset) {
  const SyntheticSpec& s = dataset.spec;
  json spec = {
      {"counties", s.counties},
      {"states", s.states},
      {"start_year", s.start_year},
      {"end_year", s.end_year},
      {"seed", s.seed},
      {"crop", std::string(crop_name(s.crop))},
      {"management_weeks", s.management_weeks},
      {"base", s.base},
      {"trend", s.trend},
      {"alpha", s.alpha},
      {"beta", s.beta},
      {"gamma", s.gamma},
      {"heat_threshold", s.heat_threshold},
      {"noise_sd", s.noise_sd},
      {"precip_first_week", s.precip_first_week},
      {"precip_last_week", s.precip_last_week},
      {"heat_first_week", s.heat_first_week},
      {"heat_last_week", s.heat_last_week},
      {"soil_missing_rate", s.soil_missing_rate},
      {"management_missing_rate", s.management_missing_rate},
  };
  auto week_list = [](int first, int last) {
    json weeks = json::array();
    for (int w = first; w <= last; ++w) weeks.push_back(w);
    return weeks;
  };
  json causal = json::array();
  causal.push_back({{"variable", std::string(weather_variable_name(kPrecipitation))},
                    {"variable_index", kPrecipitation + 1},
                    {"weeks", week_list(s.precip_first_week, s.precip_last_week)},
                    {"effect", "alpha * window mean"},
                    {"coefficient", s.alpha}});
  causal.push_back({{"variable", std::string(weather_variable_name(kMaxTemperature))},
                    {"variable_index", kMaxTemperature + 1},
                    {"weeks", week_list(s.heat_first_week, s.heat_last_week)},
                    {"effect", "gamma * relu(window mean - heat_threshold)"},
                    {"coefficient", s.gamma}});
  causal.push_back({{"variable", "soil_latent"},
                    {"effect", "beta * q; soil features carry tanh(1.5 q)"},
                    {"coefficient", s.beta}});
  causal.push_back({{"variable", "year"}, {"effect", "trend * (year - start_year)"}, {"coefficient", s.trend}});

  json latent = json::array();
  for (std::size_t c = 1; c < dataset.soil_latent.size(); ++c) latent.push_back(dataset.soil_latent[c]);

  json doc = {{"generator", spec}, {"causal", causal}, {"soil_latent", latent}};
  return doc.dump(2) + "\n";
}

SyntheticSpec parse_synthetic_metadata(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw IoError(std::string("synthetic metadata is not valid JSON: ") + e.what());
  }
  try {
    const json& g = doc.at("generator");
    SyntheticSpec s;
    s.counties = g.at("counties").get<std::size_t>();
    s.states = g.at("states").get<std::size_t>();
    s.start_year = g.at("start_year").get<int>();
    s.end_year = g.at("end_year").get<int>();
    s.seed = g.at("seed").get<std::uint64_t>();
    s.crop = parse_crop(g.at("crop").get<std::string>());
    s.management_weeks = g.at("management_weeks").get<std::size_t>();
    s.base = g.at("base").get<double>();
    s.trend = g.at("trend").get<double>();
    s.alpha = g.at("alpha").get<double>();
    s.beta = g.at("beta").get<double>();
    s.gamma = g.at("gamma").get<double>();
    s.heat_threshold = g.at("heat_threshold").get<double>();
    s.noise_sd = g.at("noise_sd").get<double>();
    s.precip_first_week = g.at("precip_first_week").get<int>();
    s.precip_last_week = g.at("precip_last_week").get<int>();
    s.heat_first_week = g.at("heat_first_week").get<int>();
    s.heat_last_week = g.at("heat_last_week").get<int>();
    s.soil_missing_rate = g.at("soil_missing_rate").get<double>();
    s.management_missing_rate = g.at("management_missing_rate").get<double>();
    return s;
  } catch (const json::exception& e) {
    throw IoError(std::string("synthetic metadata is missing a field: ") + e.what());
  }
}

}  // namespace yieldnet
