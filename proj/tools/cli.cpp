#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "yieldnet/attribution.hpp"
#include "yieldnet/data.hpp"
#include "yieldnet/error.hpp"
#include "yieldnet/experiments.hpp"
#include "yieldnet/io.hpp"
#include "yieldnet/log.hpp"
#include "yieldnet/model_io.hpp"
#include "yieldnet/synthetic.hpp"

namespace yieldnet::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kModelFile = "model.ynet";

struct Options {
  std::string data;
  std::string out;
  std::string crop = "corn";
  std::string model = "cnn-rnn";
  std::string model_file;
  std::uint64_t seed = 42;
  int year = 0;
  std::size_t window = 5;
  std::size_t threads = 0;

  // training
  std::size_t iters = 20000;
  double lr = 3e-4;
  std::size_t halve_every = 60000;
  std::size_t batch = 25;
  std::size_t curve_every = 100;
  std::size_t log_every = 1000;
  bool all_step_loss = false;

  // baselines
  std::vector<double> lasso_grid{0.3, 0.4, 0.5};
  std::size_t trees = 50;
  std::size_t tree_depth = 10;

  // gen-synthetic
  std::size_t counties = 60;
  std::size_t states = 4;
  std::string years = "1980:2000";
  std::size_t management_weeks = kDefaultManagementWeeks;
  double alpha = 20.0;
  double beta = 12.0;
  double gamma = -10.0;
  double trend = 2.0;
  double noise_sd = 3.0;
  double soil_missing = 0.0;
  double management_missing = 0.0;

  // experiments
  std::size_t folds = 5;
  std::string source = "W";
  int select_year = 0;
  std::vector<double> fractions{1.0, 0.75, 0.5};
  int first_week = 22;
  int last_week = 39;
  std::size_t step = 1;
  bool from_head = false;
};

std::pair<int, int> parse_year_range(const std::string& text) {
  const auto colon = text.find(':');
  int a = 0, b = 0;
  auto parse = [&](std::string_view part, int& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc() && ptr == part.data() + part.size();
  };
  if (colon == std::string::npos || !parse(std::string_view(text).substr(0, colon), a) ||
      !parse(std::string_view(text).substr(colon + 1), b)) {
    throw ContractViolation("--years expects FIRST:LAST, got '" + text + "'");
  }
  return {a, b};
}

std::size_t resolve_threads(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("YIELDNET_THREADS")) {
    std::size_t n = 0;
    const std::string_view text(env);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
    if (ec != std::errc() || ptr != text.data() + text.size() || n == 0) {
      throw ContractViolation("YIELDNET_THREADS must be a positive integer, got '" + std::string(text) + "'");
    }
    return n;
  }
  return 1;
}

std::vector<CountyYearRecord> load_data(const Options& o) {
  if (o.data.empty()) throw ContractViolation("--data is required");
  if (!fs::is_directory(o.data)) throw IoError("data directory " + o.data + " does not exist");
  auto records = read_dataset(o.data);
  impute_soil(records);
  impute_management(records);
  return records;
}

fs::path output_dir(const Options& o) {
  if (o.out.empty()) throw ContractViolation("--out is required");
  const fs::path out(o.out);
  if (!o.data.empty() && fs::exists(out) && fs::exists(o.data) && fs::equivalent(out, o.data)) {
    throw ContractViolation("--out must differ from --data; input directories are never written");
  }
  return out;
}

ExperimentConfig make_config(const Options& o, std::span<const CountyYearRecord> records) {
  ExperimentConfig c;
  c.crop = parse_crop(o.crop);
  c.window_years = o.window;
  c.model = parse_model_kind(o.model);
  ModelSettings& s = c.settings;
  s.seed = o.seed;
  s.network = CnnRnnConfig::for_crop(c.crop);
  s.network.window_years = o.window;
  s.network.all_step_loss = o.all_step_loss;
  for (const auto& r : records) {
    if (r.crop == c.crop) {
      s.network.management_weeks = r.management.size();
      break;
    }
  }
  s.train.max_iters = o.iters;
  s.train.base_lr = o.lr;
  s.train.halve_every = o.halve_every;
  s.train.batch_size = o.batch;
  s.train.curve_every = o.curve_every;
  s.train.log_every = o.log_every;
  s.train.threads = resolve_threads(o.threads);
  s.forest.n_trees = o.trees;
  s.forest.max_depth = o.tree_depth;
  s.forest.threads = s.train.threads;
  s.lasso_grid = o.lasso_grid;
  return c;
}

std::string format_metric(double v) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << v;
  return out.str();
}

void print_summary(const ExperimentResult& r, const fs::path& out) {
  const ArmResult& h = r.headline();
  std::cout << r.experiment << " " << model_kind_name(r.model) << " rmse=" << format_metric(h.validation.rmse)
            << " corr=" << format_metric(h.validation.correlation) << "% n=" << h.validation.count
            << " config_hash=" << r.config_hash << " -> " << out.string() << "\n";
  log_info("runtime " + format_metric(r.runtime_seconds) + " s");
}

int cmd_gen_synthetic(const Options& o) {
  SyntheticSpec spec;
  spec.counties = o.counties;
  spec.states = o.states;
  std::tie(spec.start_year, spec.end_year) = parse_year_range(o.years);
  spec.seed = o.seed;
  spec.crop = parse_crop(o.crop);
  spec.management_weeks = o.management_weeks;
  spec.alpha = o.alpha;
  spec.beta = o.beta;
  spec.gamma = o.gamma;
  spec.trend = o.trend;
  spec.noise_sd = o.noise_sd;
  spec.soil_missing_rate = o.soil_missing;
  spec.management_missing_rate = o.management_missing;
  const fs::path out = output_dir(o);

  const SyntheticDataset ds = gen_synthetic(spec);
  const std::string meta = synthetic_metadata_json(ds);
  const std::string comment = "config_hash=" + fnv1a_hex(meta) + ",seed=" + std::to_string(spec.seed);
  write_dataset(out, ds.records, comment);
  write_file_atomic(out / kSyntheticMetaFile, meta);
  std::cout << "gen-synthetic records=" << ds.records.size() << " counties=" << spec.counties
            << " years=" << spec.start_year << ":" << spec.end_year << " seed=" << spec.seed << " -> "
            << out.string() << "\n";
  return kExitOk;
}

void require_year(const Options& o) {
  if (o.year == 0) throw ContractViolation("--year is required");
}

int cmd_train(const Options& o) {
  require_year(o);
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  const ExperimentConfig config = make_config(o, records);
  const HoldoutSplit split = make_holdout_split(records, o.year, config);
  FitResult fit = fit_holdout_model(split, config);
  save_model(out / kModelFile, fit.model);

  const std::string hash = holdout_hash(config, records, o.year);
  const std::string comment = "config_hash=" + hash + ",seed=" + std::to_string(config.settings.seed);
  if (!fit.report.curve.empty()) {
    write_file_atomic(out / "loss_curve.csv", loss_curve_csv(fit.report.curve, comment));
  }
  std::cout << "train " << model_kind_name(config.model) << " samples=" << split.train.size()
            << " years<" << o.year << " config_hash=" << hash << " -> " << (out / kModelFile).string() << "\n";
  return kExitOk;
}

TrainedModel load_model_flag(const Options& o) {
  if (o.model_file.empty()) throw ContractViolation("--model-file is required");
  return load_model(o.model_file);
}

/// Window length of a stored model; baselines take it from --window.
std::size_t window_of(const TrainedModel& model, const Options& o) {
  if (const auto* m = std::get_if<CnnRnnModel>(&model)) return m->config.window_years;
  return o.window;
}

int cmd_evaluate(const Options& o) {
  require_year(o);
  const auto start = std::chrono::steady_clock::now();
  const TrainedModel model = load_model_flag(o);
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  ExperimentConfig config = make_config(o, records);
  config.window_years = window_of(model, o);
  config.model = kind_of(model);
  const HoldoutSplit split = make_holdout_split(records, o.year, config);

  ExperimentResult result;
  result.experiment = "evaluate";
  result.model = config.model;
  result.seed = config.settings.seed;
  result.config_hash = fnv1a_hex(holdout_hash(config, records, o.year) + serialize_model(model));
  result.info.emplace_back("validation_year", o.year);
  result.arms.push_back(score_model("evaluate", model, split));
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_experiment_outputs(out, result);
  print_summary(result, out);
  return kExitOk;
}

int cmd_attribute(const Options& o) {
  require_year(o);
  const TrainedModel model = load_model_flag(o);
  const auto* net = std::get_if<CnnRnnModel>(&model);
  if (net == nullptr) throw ContractViolation("attribution needs a cnn-rnn model file");
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  ExperimentConfig config = make_config(o, records);
  config.window_years = net->config.window_years;
  config.model = ModelKind::cnn_rnn;
  const HoldoutSplit split = make_holdout_split(records, o.year, config);

  AttributionOptions options;
  options.from_head = o.from_head;
  const AttributionReport report = guided_attribute(*net, std::span<const SequenceSample>(split.validation), options);
  const std::string hash = fnv1a_hex(holdout_hash(config, records, o.year) + serialize_model(model) +
                                     (o.from_head ? "head" : "lstm"));
  write_file_atomic(out / "attribution.csv",
                    attribution_csv(report, "config_hash=" + hash + ",seed=" + std::to_string(config.settings.seed)));
  const auto top = top_features(report, FeatureGroup::weather, 3);
  std::cout << "attribute samples=" << report.samples << " top_weather=";
  for (std::size_t i = 0; i < top.size(); ++i) std::cout << (i ? "; " : "") << report.layout.describe(top[i]);
  std::cout << " config_hash=" << hash << " -> " << (out / "attribution.csv").string() << "\n";
  return kExitOk;
}

int finish_holdout(const HoldoutRun& run, const fs::path& out) {
  write_experiment_outputs(out, run.result);
  save_model(out / kModelFile, run.model);
  print_summary(run.result, out);
  return kExitOk;
}

int cmd_holdout(const Options& o) {
  require_year(o);
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  return finish_holdout(temporal_holdout(records, o.year, make_config(o, records)), out);
}

int cmd_cv(const Options& o) {
  require_year(o);
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  const ExperimentResult result = kfold_location_cv(records, o.year, o.folds, make_config(o, records));
  write_experiment_outputs(out, result);
  print_summary(result, out);
  return kExitOk;
}

int cmd_ablation(const Options& o) {
  require_year(o);
  const AblationSource source = parse_ablation_source(o.source);
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  return finish_holdout(ablation_run(records, source, o.year, make_config(o, records)), out);
}

int cmd_subset(const Options& o) {
  require_year(o);
  if (o.select_year == 0) throw ContractViolation("--select-year is required");
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  SubsetOptions options;
  options.select_year = o.select_year;
  options.eval_year = o.year;
  options.fractions = o.fractions;
  const ExperimentResult result = feature_subset_run(records, options, make_config(o, records));
  write_experiment_outputs(out, result);
  print_summary(result, out);
  return kExitOk;
}

int cmd_weather_sweep(const Options& o) {
  require_year(o);
  const auto records = load_data(o);
  const fs::path out = output_dir(o);
  ExperimentConfig config = make_config(o, records);

  HoldoutRun run;
  if (o.model_file.empty()) {
    run = temporal_holdout(records, o.year, config);
  } else {
    run.model = load_model(o.model_file);
    config.window_years = window_of(run.model, o);
    config.model = kind_of(run.model);
    HoldoutSplit split = make_holdout_split(records, o.year, config);
    run.result.experiment = "holdout";
    run.result.model = config.model;
    run.result.seed = config.settings.seed;
    run.result.config_hash = fnv1a_hex(holdout_hash(config, records, o.year) + serialize_model(run.model));
    run.result.arms.push_back(score_model("holdout", run.model, split));
    run.validation = std::move(split.validation);
  }
  SweepOptions options;
  options.first_week = o.first_week;
  options.last_week = o.last_week;
  options.weeks_per_step = o.step;
  const ExperimentResult result = weather_sweep_run(run, records, options, config);
  write_experiment_outputs(out, result);
  print_summary(result, out);
  return kExitOk;
}

int cmd_summarize(const Options& o) {
  const auto records = load_data(o);
  std::set<int> years;
  std::set<int> counties;
  for (const auto& r : records) {
    years.insert(r.year);
    counties.insert(r.county_id);
  }
  const auto summary = summarize_dataset(records, years);
  constexpr std::string_view header[] = {"crop", "year", "mean", "sd", "count"};
  const std::string hash = dataset_fingerprint(records);
  CsvWriter csv(header, "config_hash=" + hash + ",seed=" + std::to_string(o.seed));
  for (const auto& row : summary) {
    csv.field(crop_name(row.crop)).field(static_cast<long long>(row.year)).field(row.mean).field(row.sd);
    csv.field(static_cast<long long>(row.count)).end_row();
  }
  std::cout << "summarize records=" << records.size() << " counties=" << counties.size();
  if (!years.empty()) std::cout << " years=" << *years.begin() << ":" << *years.rbegin();
  if (!o.out.empty()) {
    const fs::path out = output_dir(o);
    write_file_atomic(out / "summary.csv", csv.text());
    std::cout << " -> " << (out / "summary.csv").string();
  } else {
    std::cout << " data_hash=" << hash;
  }
  std::cout << "\n";
  return kExitOk;
}

void add_common(CLI::App& app, Options& o) {
  app.add_option("--data", o.data, "Dataset directory (yield/weather/soil/management CSVs)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--crop", o.crop, "corn or soybean")->capture_default_str();
  app.add_option("--model", o.model, "cnn-rnn, dfnn, rf, lasso or average")->capture_default_str();
  app.add_option("--model-file", o.model_file, "Trained model written by train or experiment holdout");
  app.add_option("--seed", o.seed, "Seed for initialization, sampling and folds")->capture_default_str();
  app.add_option("--year", o.year, "Validation / target year");
  app.add_option("--window", o.window, "Years of history per sample (k)")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads (default: YIELDNET_THREADS or 1)");

  app.add_option("--iters", o.iters, "Training iterations")->capture_default_str();
  app.add_option("--lr", o.lr, "Initial Adam learning rate")->capture_default_str();
  app.add_option("--halve-every", o.halve_every, "Iterations per learning-rate halving")->capture_default_str();
  app.add_option("--batch", o.batch, "Mini-batch size")->capture_default_str();
  app.add_option("--curve-every", o.curve_every, "Loss-curve spacing")->capture_default_str();
  app.add_option("--log-every", o.log_every, "Loss line spacing on stderr (0 = quiet)")->capture_default_str();
  app.add_flag("--all-step-loss", o.all_step_loss, "Train on every unrolled step");
  app.add_option("--lasso-grid", o.lasso_grid, "Candidate LASSO penalties")->delimiter(',')->capture_default_str();
  app.add_option("--trees", o.trees, "Random forest size")->capture_default_str();
  app.add_option("--tree-depth", o.tree_depth, "Random forest depth limit")->capture_default_str();

  app.add_option("--counties", o.counties, "Synthetic counties")->capture_default_str();
  app.add_option("--states", o.states, "Synthetic states")->capture_default_str();
  app.add_option("--years", o.years, "Synthetic year range FIRST:LAST")->capture_default_str();
  app.add_option("--management-weeks", o.management_weeks, "Synthetic planting-progress weeks")
      ->capture_default_str();
  app.add_option("--alpha", o.alpha, "Synthetic precipitation effect")->capture_default_str();
  app.add_option("--beta", o.beta, "Synthetic soil effect")->capture_default_str();
  app.add_option("--gamma", o.gamma, "Synthetic heat effect")->capture_default_str();
  app.add_option("--trend", o.trend, "Synthetic yearly trend")->capture_default_str();
  app.add_option("--noise-sd", o.noise_sd, "Synthetic yield noise")->capture_default_str();
  app.add_option("--soil-missing", o.soil_missing, "Fraction of soil cells left empty")->capture_default_str();
  app.add_option("--management-missing", o.management_missing, "Fraction of management cells left empty")
      ->capture_default_str();

  app.add_option("--folds", o.folds, "Cross-validation folds")->capture_default_str();
  app.add_option("--source", o.source, "Ablation source: W, S, M or AVG")->capture_default_str();
  app.add_option("--select-year", o.select_year, "Feature-selection year for subset runs");
  app.add_option("--fractions", o.fractions, "Subset fractions")->delimiter(',')->capture_default_str();
  app.add_option("--first-week", o.first_week, "First substituted week")->capture_default_str();
  app.add_option("--last-week", o.last_week, "Last substituted week")->capture_default_str();
  app.add_option("--step", o.step, "Weeks restored per sweep step")->capture_default_str();
  app.add_flag("--from-head", o.from_head, "Attribute from the yield head instead of the LSTM output");
}

int dispatch(CLI::App& app, const Options& o) {
  auto chosen = [&](const char* name) { return app.got_subcommand(name); };
  if (chosen("gen-synthetic")) return cmd_gen_synthetic(o);
  if (chosen("train")) return cmd_train(o);
  if (chosen("evaluate")) return cmd_evaluate(o);
  if (chosen("attribute")) return cmd_attribute(o);
  if (chosen("summarize")) return cmd_summarize(o);
  CLI::App* exp = app.get_subcommand("experiment");
  if (exp->got_subcommand("holdout")) return cmd_holdout(o);
  if (exp->got_subcommand("cv")) return cmd_cv(o);
  if (exp->got_subcommand("ablation")) return cmd_ablation(o);
  if (exp->got_subcommand("subset")) return cmd_subset(o);
  return cmd_weather_sweep(o);
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Crop-yield forecasting with a CNN-RNN and baselines"};
  app.name("yieldnet");
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  Options o;
  add_common(app, o);

  app.add_subcommand("gen-synthetic", "Write a synthetic dataset with known causal structure");
  app.add_subcommand("train", "Train on target years before --year and save the model");
  app.add_subcommand("evaluate", "Score a saved model at --year");
  app.add_subcommand("attribute", "Guided-backpropagation importance of a saved cnn-rnn model");
  app.add_subcommand("summarize", "Yield mean and spread per crop and year");
  CLI::App* exp = app.add_subcommand("experiment", "Run an experiment protocol");
  exp->require_subcommand(1);
  exp->add_subcommand("holdout", "Temporal holdout at --year");
  exp->add_subcommand("cv", "Leave-location-out cross-validation at --year");
  exp->add_subcommand("ablation", "Single-source ablation (--source)");
  exp->add_subcommand("subset", "Attribution-driven feature subsets");
  exp->add_subcommand("weather-sweep", "Weekly weather update sweep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n"
              << app.get_formatter()->make_help(&app, "yieldnet", CLI::AppFormatMode::Normal);
    return kExitUsage;
  }

  try {
    return dispatch(app, o);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    // Contract violations, unusable data and aborted training.
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace yieldnet::cli
