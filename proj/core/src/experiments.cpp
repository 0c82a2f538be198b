#include "yieldnet/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "yieldnet/error.hpp"
#include "yieldnet/io.hpp"
#include "yieldnet/log.hpp"
#include "yieldnet/rng.hpp"

namespace yieldnet {
namespace {

using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void text(std::string_view s) { bytes(s.data(), s.size()); }
  template <typename T>
  void value(T v) {
    bytes(&v, sizeof v);
  }
  void reals(std::span<const double> v) {
    for (double x : v) value(x);
  }
  std::string hex() const {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash_));
    return buffer;
  }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

SplitMetrics metrics_of(std::span<const double> pred, std::span<const double> truth) {
  SplitMetrics m;
  m.count = pred.size();
  if (pred.empty()) return m;
  m.rmse = rmse(pred, truth);
  m.correlation = pred.size() >= 2 ? pearson_corr(pred, truth) : 0.0;
  return m;
}

std::vector<CountyYearRecord> of_crop(std::span<const CountyYearRecord> records, Crop crop) {
  std::vector<CountyYearRecord> out;
  for (const auto& r : records)
    if (r.crop == crop) out.push_back(r);
  return out;
}

std::vector<SequenceSample> monitor_slice(const std::vector<SequenceSample>& train, const ExperimentConfig& config) {
  if (!config.monitor_last_year) return {};
  int last = train.front().target_year;
  for (const auto& s : train) last = std::max(last, s.target_year);
  std::vector<SequenceSample> out;
  for (const auto& s : train)
    if (s.target_year == last) out.push_back(s);
  return out;
}

std::string hash_for(const std::string& experiment, const ExperimentConfig& config,
                     std::span<const CountyYearRecord> records, const std::string& extra) {
  Fnv1a h;
  h.text(experiment);
  h.text("\n");
  h.text(describe_config(config));
  h.text(extra);
  h.text("\ndata=");
  h.text(dataset_fingerprint(records));
  return h.hex();
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  require(!pred.empty(), "rmse of an empty set");
  require(pred.size() == truth.size(), "rmse lengths differ");
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sq += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(sq / static_cast<double>(pred.size()));
}

double pearson_corr(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() >= 2, "correlation needs at least two values");
  require(pred.size() == truth.size(), "correlation lengths differ");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (constant(pred) || constant(truth)) return 0.0;
  const double n = static_cast<double>(pred.size());
  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cov += (pred[i] - mp) * (truth[i] - mt);
    vp += (pred[i] - mp) * (pred[i] - mp);
    vt += (truth[i] - mt) * (truth[i] - mt);
  }
  if (vp == 0.0 || vt == 0.0) return 0.0;
  return std::clamp(100.0 * cov / std::sqrt(vp * vt), -100.0, 100.0);
}

std::string fnv1a_hex(std::string_view text) {
  Fnv1a h;
  h.text(text);
  return h.hex();
}

std::vector<SealedTargets::Key> SealedTargets::keys() const {
  std::vector<Key> out;
  for (const auto& [key, value] : values_) out.push_back(key);
  return out;
}

std::map<SealedTargets::Key, double> SealedTargets::reveal(const std::map<Key, double>& predicted) const {
  require(!predicted.empty(), "targets can only be revealed against predictions");
  for (const auto& [key, value] : predicted) {
    require(std::isfinite(value), "prediction for county " + std::to_string(key.first) + " is not finite");
  }
  std::map<Key, double> out;
  for (const auto& [key, value] : predicted)
    if (auto it = values_.find(key); it != values_.end()) out.emplace(key, it->second);
  ++reveals_;
  return out;
}

SealedDataset seal_years(std::span<const CountyYearRecord> records, Crop crop, const std::set<int>& years) {
  SealedDataset out;
  out.records = of_crop(records, crop);
  for (auto& r : out.records) {
    if (years.count(r.year) && r.yield.has_value()) {
      out.sealed.seal({r.county_id, r.year}, *r.yield);
      r.yield.reset();
    }
  }
  return out;
}

std::string describe_config(const ExperimentConfig& config) {
  const ModelSettings& s = config.settings;
  const CnnRnnConfig& n = s.network;
  const TrainConfig& t = s.train;
  std::ostringstream out;
  out << "crop=" << crop_name(config.crop) << "\nwindow_years=" << config.window_years
      << "\nmodel=" << model_kind_name(config.model) << "\nseed=" << s.seed
      << "\nmonitor_last_year=" << config.monitor_last_year << "\nbase_lr=" << format_double(t.base_lr)
      << "\nhalve_every=" << t.halve_every << "\nmax_iters=" << t.max_iters << "\nbatch_size=" << t.batch_size
      << "\ncurve_every=" << t.curve_every << "\nlstm_hidden=" << n.lstm_hidden
      << "\nfc_weather_out=" << n.fc_weather_out << "\nfc_soil_out=" << n.fc_soil_out
      << "\nmanagement_weeks=" << n.management_weeks << "\nall_step_loss=" << n.all_step_loss;
  for (const auto& c : n.weather_convs) out << "\nweather_conv=" << c.out_channels << "/" << c.kernel << "/" << c.pool;
  for (const auto& c : n.soil_convs) out << "\nsoil_conv=" << c.out_channels << "/" << c.kernel << "/" << c.pool;
  out << "\nforest=" << s.forest.n_trees << "/" << s.forest.max_depth << "/" << s.forest.min_leaf << "/"
      << s.forest.features_per_split << "/" << s.forest.bootstrap;
  out << "\nlasso_grid=";
  for (double l : s.lasso_grid) out << format_double(l) << ";";
  out << "\nkeep=";
  for (auto k : s.keep) out << static_cast<int>(k);
  return out.str();
}

std::string dataset_fingerprint(std::span<const CountyYearRecord> records) {
  Fnv1a h;
  for (const auto& r : records) {
    h.value(r.county_id);
    h.value(r.state_id);
    h.value(r.year);
    h.value(static_cast<int>(r.crop));
    h.value(r.yield.has_value());
    h.value(r.yield.value_or(0.0));
    h.reals(r.weather);
    h.reals(r.soil_profile);
    h.reals(r.soil_surface);
    h.reals(r.management);
  }
  return h.hex();
}

HoldoutSplit make_holdout_split(std::span<const CountyYearRecord> records, int validation_year,
                                const ExperimentConfig& config, const std::set<int>* train_counties,
                                const std::set<int>* eval_counties) {
  // Validation-year yields are sealed before anything else looks at the
  // data; later years are dropped outright.
  std::vector<CountyYearRecord> upto;
  for (const auto& r : records)
    if (r.crop == config.crop && r.year <= validation_year) upto.push_back(r);
  SealedDataset sealed = seal_years(upto, config.crop, {validation_year});

  std::vector<CountyYearRecord> train_records;
  std::vector<CountyYearRecord> eval_records;
  std::set<int> years;
  for (const auto& r : sealed.records) {
    if (r.year < validation_year && (train_counties == nullptr || train_counties->count(r.county_id))) {
      train_records.push_back(r);
      years.insert(r.year);
    }
    if (eval_counties == nullptr || eval_counties->count(r.county_id)) eval_records.push_back(r);
  }
  const auto avg = compute_avg_yields(train_records, config.crop);

  auto train = assemble_sequences(train_records, config.crop, config.window_years, years, Phase::train, avg);
  if (train.samples.empty()) {
    throw DataError("insufficient history: no complete " + std::to_string(config.window_years + 1) +
                    "-year window ends before " + std::to_string(validation_year));
  }
  auto validation =
      assemble_sequences(eval_records, config.crop, config.window_years, {validation_year}, Phase::test, avg);
  if (validation.samples.empty()) {
    throw DataError("no county has a complete window ending at " + std::to_string(validation_year));
  }
  HoldoutSplit split;
  split.validation_year = validation_year;
  split.train = std::move(train.samples);
  split.validation = std::move(validation.samples);
  split.sealed = std::move(sealed.sealed);
  split.skipped = validation.skipped;
  return split;
}

FitResult fit_holdout_model(const HoldoutSplit& split, const ExperimentConfig& config) {
  ModelSettings settings = config.settings;
  settings.network.window_years = config.window_years;
  settings.network.management_weeks = split.train.front().target_record().management.size();
  return fit_model(config.model, split.train, settings, monitor_slice(split.train, config));
}

ArmResult score_model(const std::string& label, const TrainedModel& model, const HoldoutSplit& split) {
  ArmResult arm;
  arm.label = label;
  const auto train_pred = predict(model, split.train);
  std::vector<double> train_truth;
  for (const auto& s : split.train) train_truth.push_back(*s.target);
  arm.train = metrics_of(train_pred, train_truth);

  const auto pred = predict(model, split.validation);
  std::map<SealedTargets::Key, double> predicted;
  for (std::size_t i = 0; i < pred.size(); ++i)
    predicted[{split.validation[i].county_id, split.validation[i].target_year}] = pred[i];
  const auto truths = split.sealed.reveal(predicted);

  std::vector<double> p, t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    PredictionRow row{split.validation[i].county_id, split.validation[i].target_year, std::nullopt, pred[i]};
    if (auto it = truths.find({row.county_id, row.year}); it != truths.end()) {
      row.truth = it->second;
      p.push_back(row.prediction);
      t.push_back(it->second);
    }
    arm.predictions.push_back(row);
  }
  arm.validation = metrics_of(p, t);
  arm.info.emplace_back("train_samples", static_cast<double>(split.train.size()));
  arm.info.emplace_back("validation_samples", static_cast<double>(split.validation.size()));
  return arm;
}

HoldoutRun temporal_holdout(std::span<const CountyYearRecord> records, int validation_year,
                            const ExperimentConfig& config) {
  const auto start = Clock::now();
  HoldoutSplit split = make_holdout_split(records, validation_year, config);
  FitResult fit = fit_holdout_model(split, config);
  ArmResult arm = score_model("holdout", fit.model, split);
  arm.curve = std::move(fit.report.curve);
  if (config.model == ModelKind::lasso) arm.info.emplace_back("lasso_lambda", fit.lasso_lambda);

  HoldoutRun run;
  run.result.experiment = "holdout";
  run.result.model = config.model;
  run.result.seed = config.settings.seed;
  run.result.config_hash = holdout_hash(config, records, validation_year);
  run.result.info.emplace_back("validation_year", validation_year);
  run.result.info.emplace_back("skipped_windows", static_cast<double>(split.skipped));
  run.result.arms.push_back(std::move(arm));
  run.model = std::move(fit.model);
  run.validation = std::move(split.validation);
  run.result.runtime_seconds = elapsed(start);
  return run;
}

std::string holdout_hash(const ExperimentConfig& config, std::span<const CountyYearRecord> records,
                         int validation_year) {
  return hash_for("holdout", config, records, "\nvalidation_year=" + std::to_string(validation_year));
}

std::vector<std::vector<int>> location_folds(std::vector<int> counties, std::size_t folds, std::uint64_t seed) {
  require(folds >= 2, "cross-validation needs at least two folds");
  std::sort(counties.begin(), counties.end());
  counties.erase(std::unique(counties.begin(), counties.end()), counties.end());
  if (counties.size() < folds) {
    throw DataError("cannot split " + std::to_string(counties.size()) + " counties into " + std::to_string(folds) +
                    " non-empty folds");
  }
  Rng rng(mix_seed(seed, 0x666f6c6473ULL));
  for (std::size_t i = counties.size(); i > 1; --i) std::swap(counties[i - 1], counties[rng.below(i)]);
  std::vector<std::vector<int>> out(folds);
  const std::size_t base = counties.size() / folds;
  const std::size_t extra = counties.size() % folds;
  std::size_t at = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    out[f].assign(counties.begin() + static_cast<std::ptrdiff_t>(at),
                  counties.begin() + static_cast<std::ptrdiff_t>(at + size));
    std::sort(out[f].begin(), out[f].end());
    at += size;
  }
  return out;
}

ExperimentResult kfold_location_cv(std::span<const CountyYearRecord> records, int target_year, std::size_t folds,
                                   const ExperimentConfig& config) {
  const auto start = Clock::now();
  std::vector<int> with_truth;
  std::set<int> all_counties;
  for (const auto& r : records) {
    if (r.crop != config.crop) continue;
    all_counties.insert(r.county_id);
    if (r.year == target_year && r.yield.has_value()) with_truth.push_back(r.county_id);
  }
  const auto partition = location_folds(with_truth, folds, config.settings.seed);

  ExperimentResult result;
  result.experiment = "cv";
  result.model = config.model;
  result.seed = config.settings.seed;
  result.config_hash = hash_for("cv", config, records,
                                "\ntarget_year=" + std::to_string(target_year) + "\nfolds=" + std::to_string(folds));
  result.info.emplace_back("target_year", target_year);
  result.info.emplace_back("folds", static_cast<double>(folds));

  ArmResult pooled;
  pooled.label = "pooled";
  double train_sq = 0.0;
  std::size_t train_n = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::set<int> eval(partition[f].begin(), partition[f].end());
    std::set<int> train;
    for (int c : all_counties)
      if (!eval.count(c)) train.insert(c);
    HoldoutSplit split = make_holdout_split(records, target_year, config, &train, &eval);
    FitResult fit = fit_holdout_model(split, config);
    ArmResult arm = score_model("fold-" + std::to_string(f + 1), fit.model, split);
    arm.curve = std::move(fit.report.curve);
    arm.info.emplace_back("fold_counties", static_cast<double>(eval.size()));
    pooled.predictions.insert(pooled.predictions.end(), arm.predictions.begin(), arm.predictions.end());
    train_sq += arm.train.rmse * arm.train.rmse * static_cast<double>(arm.train.count);
    train_n += arm.train.count;
    result.arms.push_back(std::move(arm));
  }
  std::sort(pooled.predictions.begin(), pooled.predictions.end(),
            [](const auto& a, const auto& b) { return a.county_id < b.county_id; });
  std::vector<double> p, t;
  for (const auto& row : pooled.predictions) {
    if (!row.truth) continue;
    p.push_back(row.prediction);
    t.push_back(*row.truth);
  }
  pooled.validation = metrics_of(p, t);
  // Folds train on different counties, so only the pooled RMSE is meaningful.
  pooled.train.count = train_n;
  pooled.train.rmse = std::sqrt(train_sq / static_cast<double>(train_n));
  result.arms.insert(result.arms.begin(), std::move(pooled));
  result.runtime_seconds = elapsed(start);
  return result;
}

AblationSource parse_ablation_source(std::string_view text) {
  if (text == "W") return AblationSource::weather;
  if (text == "S") return AblationSource::soil;
  if (text == "M") return AblationSource::management;
  if (text == "AVG") return AblationSource::average;
  throw ContractViolation("unknown ablation source '" + std::string(text) + "' (expected W, S, M or AVG)");
}

std::string_view ablation_source_name(AblationSource source) {
  switch (source) {
    case AblationSource::weather: return "W";
    case AblationSource::soil: return "S";
    case AblationSource::management: return "M";
    case AblationSource::average: return "AVG";
  }
  return "?";
}

std::vector<std::uint8_t> ablation_mask(AblationSource source, const FeatureLayout& layout) {
  std::vector<FeatureGroup> keep;
  switch (source) {
    case AblationSource::weather: keep = {FeatureGroup::weather}; break;
    case AblationSource::soil: keep = {FeatureGroup::soil_depth, FeatureGroup::soil_surface}; break;
    case AblationSource::management: keep = {FeatureGroup::management}; break;
    case AblationSource::average: break;
  }
  return group_mask(layout, keep);
}

HoldoutRun ablation_run(std::span<const CountyYearRecord> records, AblationSource source, int validation_year,
                        const ExperimentConfig& config) {
  ExperimentConfig arm_config = config;
  if (source == AblationSource::average) {
    arm_config.model = ModelKind::average;
  } else {
    arm_config.settings.keep = ablation_mask(source, arm_config.settings.network.layout());
  }
  HoldoutRun run = temporal_holdout(records, validation_year, arm_config);
  const std::string name = "ablation-" + std::string(ablation_source_name(source));
  run.result.experiment = name;
  run.result.arms.front().label = name;
  run.result.config_hash =
      hash_for(name, arm_config, records, "\nvalidation_year=" + std::to_string(validation_year));
  return run;
}

ExperimentResult feature_subset_run(std::span<const CountyYearRecord> records, const SubsetOptions& options,
                                    const ExperimentConfig& config) {
  const auto start = Clock::now();
  if (options.select_year >= options.eval_year) {
    throw ContractViolation("feature selection year must precede the evaluation year");
  }
  require(config.model == ModelKind::cnn_rnn, "feature subsets are defined for the CNN-RNN model");
  require(!options.fractions.empty(), "no subset fractions given");

  // Selection never sees the evaluation year or anything after it.
  std::vector<CountyYearRecord> before_eval;
  for (const auto& r : records)
    if (r.year < options.eval_year) before_eval.push_back(r);
  HoldoutRun selection = temporal_holdout(before_eval, options.select_year, config);
  AttributionReport report = attribute_holdout(selection);

  ExperimentResult result;
  result.experiment = "subset";
  result.model = config.model;
  result.seed = config.settings.seed;
  std::string extra = "\nselect_year=" + std::to_string(options.select_year) +
                      "\neval_year=" + std::to_string(options.eval_year) + "\nfractions=";
  for (double f : options.fractions) extra += format_double(f) + ";";
  result.config_hash = hash_for("subset", config, records, extra);
  result.info.emplace_back("select_year", options.select_year);
  result.info.emplace_back("eval_year", options.eval_year);
  result.info.emplace_back("selection_validation_rmse", selection.result.headline().validation.rmse);

  for (double fraction : options.fractions) {
    const auto mask = select_top_fraction(report, fraction);
    ArmResult arm;
    if (fraction == 1.0 && options.full_run != nullptr) {
      arm = options.full_run->result.headline();
    } else {
      ExperimentConfig arm_config = config;
      arm_config.settings.keep = mask;
      arm = temporal_holdout(records, options.eval_year, arm_config).result.headline();
    }
    arm.label = "fraction=" + format_double(fraction);
    arm.info.emplace_back("kept_features", static_cast<double>(std::count(mask.begin(), mask.end(), 1)));
    result.arms.push_back(std::move(arm));
  }
  result.attribution = std::move(report);
  result.runtime_seconds = elapsed(start);
  return result;
}

AttributionReport attribute_holdout(const HoldoutRun& run, const AttributionOptions& options) {
  const auto* model = std::get_if<CnnRnnModel>(&run.model);
  require(model != nullptr, "attribution needs a trained CNN-RNN model");
  return guided_attribute(*model, std::span<const SequenceSample>(run.validation), options);
}

ExperimentResult weather_sweep_run(const HoldoutRun& run, std::span<const CountyYearRecord> records,
                                   const SweepOptions& options, const ExperimentConfig& config) {
  const auto start = Clock::now();
  require(options.first_week >= 1 && options.first_week <= options.last_week && options.last_week <= 52,
          "substitution weeks must lie within 1..52");
  require(options.weeks_per_step >= 1, "weeks per step must be positive");

  std::map<int, double> truth;
  for (const auto& row : run.result.headline().predictions)
    if (row.truth) truth[row.county_id] = *row.truth;

  const RecordIndex index(records);
  std::vector<SequenceSample> samples;
  std::vector<const CountyYearRecord*> sources;
  std::size_t skipped = 0;
  for (const auto& s : run.validation) {
    const CountyYearRecord* source = index.find(s.county_id, s.target_year - 1, s.crop);
    if (source == nullptr || !truth.count(s.county_id)) {
      ++skipped;
      continue;
    }
    samples.push_back(s);
    sources.push_back(source);
  }
  if (skipped > 0) log_warning("weather sweep: skipped " + std::to_string(skipped) + " counties without prior-year weather or truth");
  require(!samples.empty(), "weather sweep has no county with prior-year weather");

  ExperimentResult result;
  result.experiment = "weather-sweep";
  result.model = run.result.model;
  result.seed = run.result.seed;
  result.config_hash =
      hash_for("weather-sweep", config, records,
               "\nweeks=" + std::to_string(options.first_week) + "-" + std::to_string(options.last_week) +
                   "\nstep=" + std::to_string(options.weeks_per_step) + "\nmodel_hash=" + run.result.config_hash);
  result.info.emplace_back("first_week", options.first_week);
  result.info.emplace_back("last_week", options.last_week);
  result.info.emplace_back("skipped_counties", static_cast<double>(skipped));

  const auto window = static_cast<std::size_t>(options.last_week - options.first_week + 1);
  std::vector<std::size_t> schedule;
  for (std::size_t k = 0; k < window; k += options.weeks_per_step) schedule.push_back(k);
  schedule.push_back(window);

  std::vector<double> t;
  for (const auto& s : samples) t.push_back(truth.at(s.county_id));
  for (std::size_t updated : schedule) {
    std::set<int> substituted;
    for (int w = options.first_week + static_cast<int>(updated); w <= options.last_week; ++w) substituted.insert(w);
    std::vector<SequenceSample> modified = samples;
    for (std::size_t i = 0; i < modified.size(); ++i) substitute_weather(modified[i], sources[i], substituted);
    const auto pred = predict(run.model, modified);
    const double mean = std::accumulate(pred.begin(), pred.end(), 0.0) / static_cast<double>(pred.size());
    result.sweep.push_back({updated, rmse(pred, t), mean});

    if (updated == 0 || updated == window) {
      ArmResult arm;
      arm.label = updated == 0 ? "prior-year-weather" : "true-weather";
      for (std::size_t i = 0; i < modified.size(); ++i)
        arm.predictions.push_back({modified[i].county_id, modified[i].target_year, t[i], pred[i]});
      arm.validation = metrics_of(pred, t);
      result.arms.push_back(std::move(arm));
    }
  }
  // Headline: the fully updated forecast.
  std::reverse(result.arms.begin(), result.arms.end());
  result.runtime_seconds = elapsed(start);
  return result;
}

std::string output_comment(const ExperimentResult& result) {
  return "config_hash=" + result.config_hash + ",seed=" + std::to_string(result.seed);
}

namespace {

json metrics_object(const ArmResult& arm) {
  auto number = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json m = {{"label", arm.label},
            {"train_rmse", number(arm.train.rmse)},
            {"train_correlation_pct", number(arm.train.correlation)},
            {"train_count", arm.train.count},
            {"validation_rmse", number(arm.validation.rmse)},
            {"validation_correlation_pct", number(arm.validation.correlation)},
            {"validation_count", arm.validation.count}};
  json info = json::object();
  for (const auto& [key, value] : arm.info) info[key] = number(value);
  m["info"] = info;
  return m;
}

std::string arm_file_label(const std::string& label) {
  std::string out;
  for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

}  // namespace

std::string metrics_json(const ExperimentResult& result) {
  json doc;
  doc["experiment"] = result.experiment;
  doc["model"] = std::string(model_kind_name(result.model));
  doc["config_hash"] = result.config_hash;
  doc["seed"] = result.seed;
  json headline = metrics_object(result.headline());
  headline.erase("info");
  headline.erase("label");
  doc["metrics"] = headline;
  json arms = json::array();
  for (const auto& arm : result.arms) arms.push_back(metrics_object(arm));
  doc["arms"] = arms;
  json info = json::object();
  for (const auto& [key, value] : result.info) info[key] = std::isfinite(value) ? json(value) : json(nullptr);
  doc["info"] = info;
  return doc.dump(2) + "\n";
}

std::string predictions_csv(const ArmResult& arm, const ExperimentResult& result) {
  constexpr std::string_view header[] = {"county_id", "year", "truth", "prediction", "abs_error"};
  CsvWriter csv(header, output_comment(result));
  for (const auto& row : arm.predictions) {
    csv.field(static_cast<long long>(row.county_id)).field(static_cast<long long>(row.year));
    if (row.truth) {
      csv.field(*row.truth).field(row.prediction).field(std::abs(row.prediction - *row.truth));
    } else {
      csv.empty_field().field(row.prediction).empty_field();
    }
    csv.end_row();
  }
  return csv.text();
}

std::string loss_curve_csv(std::span<const LossCurveRow> curve, std::string_view comment) {
  constexpr std::string_view header[] = {"iter", "lr", "train_loss", "monitor_loss"};
  CsvWriter csv(header, comment);
  for (const auto& row : curve) {
    csv.field(static_cast<long long>(row.iter)).field(row.lr).field(row.train_loss);
    if (std::isnan(row.monitor_loss)) csv.empty_field(); else csv.field(row.monitor_loss);
    csv.end_row();
  }
  return csv.text();
}

std::string sweep_csv(const ExperimentResult& result) {
  constexpr std::string_view header[] = {"weeks_updated", "rmse", "mean_pred"};
  CsvWriter csv(header, output_comment(result));
  for (const auto& row : result.sweep) {
    csv.field(static_cast<long long>(row.weeks_updated)).field(row.rmse).field(row.mean_prediction);
    csv.end_row();
  }
  return csv.text();
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result) {
  const std::string comment = output_comment(result);
  write_file_atomic(dir / "metrics.json", metrics_json(result));
  write_file_atomic(dir / "predictions.csv", predictions_csv(result.headline(), result));
  if (!result.headline().curve.empty()) {
    write_file_atomic(dir / "loss_curve.csv", loss_curve_csv(result.headline().curve, comment));
  }
  if (result.arms.size() > 1) {
    for (const auto& arm : result.arms) {
      const std::string label = arm_file_label(arm.label);
      write_file_atomic(dir / ("predictions_" + label + ".csv"), predictions_csv(arm, result));
      if (!arm.curve.empty()) write_file_atomic(dir / ("loss_curve_" + label + ".csv"), loss_curve_csv(arm.curve, comment));
    }
  }
  if (!result.sweep.empty()) write_file_atomic(dir / "sweep.csv", sweep_csv(result));
  if (result.attribution) write_file_atomic(dir / "attribution.csv", attribution_csv(*result.attribution, comment));
}

}  // namespace yieldnet
