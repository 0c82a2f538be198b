#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "yieldnet/attribution.hpp"
#include "yieldnet/data.hpp"
#include "yieldnet/predictor.hpp"

namespace yieldnet {

/// Root mean squared error. Lengths must match and be non-zero.
double rmse(std::span<const double> pred, std::span<const double> truth);
/// Pearson correlation in percent; 0 when either side is constant.
double pearson_corr(std::span<const double> pred, std::span<const double> truth);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Yields withheld from a dataset. Values are handed out only once
/// predictions exist for every key, and every hand-out is counted.
class SealedTargets {
 public:
  using Key = std::pair<int, int>;  // (county_id, year)

  void seal(Key key, double value) { values_[key] = value; }
  bool contains(Key key) const { return values_.count(key) != 0; }
  std::size_t size() const { return values_.size(); }
  std::vector<Key> keys() const;

  /// Truth for each predicted key that has one. `predicted` must cover
  /// every sealed key it asks about; throws ContractViolation otherwise.
  std::map<Key, double> reveal(const std::map<Key, double>& predicted) const;
  std::size_t reveals() const { return reveals_; }

 private:
  std::map<Key, double> values_;
  mutable std::size_t reveals_ = 0;
};

/// Records of one crop with the yields of `years` moved into a SealedTargets.
struct SealedDataset {
  std::vector<CountyYearRecord> records;
  SealedTargets sealed;
};

SealedDataset seal_years(std::span<const CountyYearRecord> records, Crop crop, const std::set<int>& years);

/// Shared knobs of every protocol.
struct ExperimentConfig {
  Crop crop = Crop::corn;
  std::size_t window_years = 5;
  ModelKind model = ModelKind::cnn_rnn;
  ModelSettings settings;
  /// Monitoring slice for the loss curve: the last training year.
  bool monitor_last_year = true;
};

struct SplitMetrics {
  double rmse = 0.0;
  double correlation = 0.0;  // percent
  std::size_t count = 0;
};

struct PredictionRow {
  int county_id = 0;
  int year = 0;
  std::optional<double> truth;
  double prediction = 0.0;
};

struct ArmResult {
  std::string label;
  SplitMetrics train;
  SplitMetrics validation;
  /// Validation predictions ordered by county.
  std::vector<PredictionRow> predictions;
  std::vector<LossCurveRow> curve;
  /// Ordered extra numbers (chosen lambda, fold size, ...).
  std::vector<std::pair<std::string, double>> info;
};

struct SweepRow {
  std::size_t weeks_updated = 0;
  double rmse = 0.0;
  double mean_prediction = 0.0;
};

struct ExperimentResult {
  std::string experiment;
  ModelKind model = ModelKind::cnn_rnn;
  std::uint64_t seed = 0;
  std::string config_hash;
  /// The first arm is the headline result.
  std::vector<ArmResult> arms;
  std::vector<std::pair<std::string, double>> info;
  std::vector<SweepRow> sweep;
  std::optional<AttributionReport> attribution;
  /// Wall-clock seconds; reported on the console only.
  double runtime_seconds = 0.0;

  const ArmResult& headline() const { return arms.front(); }
};

/// A trained model plus the split it was trained for, so later protocols
/// (attribution, sweeps, subsets) can reuse it.
struct HoldoutRun {
  ExperimentResult result;
  TrainedModel model;
  /// Test-phase validation samples (targets stripped).
  std::vector<SequenceSample> validation;
};

/// Training samples (every target year before the validation year) and
/// test-phase validation samples, with validation yields sealed. The
/// optional county sets restrict training and evaluation respectively.
struct HoldoutSplit {
  int validation_year = 0;
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> validation;
  SealedTargets sealed;
  std::size_t skipped = 0;
};

HoldoutSplit make_holdout_split(std::span<const CountyYearRecord> records, int validation_year,
                                const ExperimentConfig& config, const std::set<int>* train_counties = nullptr,
                                const std::set<int>* eval_counties = nullptr);
FitResult fit_holdout_model(const HoldoutSplit& split, const ExperimentConfig& config);
/// Train and validation metrics of a fitted model; reveals the sealed truths.
ArmResult score_model(const std::string& label, const TrainedModel& model, const HoldoutSplit& split);
std::string holdout_hash(const ExperimentConfig& config, std::span<const CountyYearRecord> records,
                         int validation_year);

/// Train on every target year before `validation_year`, evaluate at it.
HoldoutRun temporal_holdout(std::span<const CountyYearRecord> records, int validation_year,
                            const ExperimentConfig& config);

/// Seeded partition of the counties with target-year truth into `folds`
/// near-equal folds; each fold is predicted by a model trained on the other
/// counties' earlier years. The headline arm pools all folds.
ExperimentResult kfold_location_cv(std::span<const CountyYearRecord> records, int target_year, std::size_t folds,
                                   const ExperimentConfig& config);

/// Assigns counties to folds; exposed for tests.
std::vector<std::vector<int>> location_folds(std::vector<int> counties, std::size_t folds, std::uint64_t seed);

enum class AblationSource { weather, soil, management, average };
AblationSource parse_ablation_source(std::string_view text);
std::string_view ablation_source_name(AblationSource source);
/// Keep-mask of a source: its own inputs plus the average-yield input.
std::vector<std::uint8_t> ablation_mask(AblationSource source, const FeatureLayout& layout);

HoldoutRun ablation_run(std::span<const CountyYearRecord> records, AblationSource source, int validation_year,
                        const ExperimentConfig& config);

struct SubsetOptions {
  int select_year = 0;
  int eval_year = 0;
  std::vector<double> fractions{1.0, 0.75, 0.5};
  /// Reuse an already trained eval-year holdout for fraction 1.0.
  const HoldoutRun* full_run = nullptr;
};

/// Attribution-driven feature selection followed by masked retraining.
/// Arms are labelled "fraction=<f>" in the order given.
ExperimentResult feature_subset_run(std::span<const CountyYearRecord> records, const SubsetOptions& options,
                                    const ExperimentConfig& config);

struct SweepOptions {
  int first_week = 22;
  int last_week = 39;
  /// Weeks restored per step; the schedule runs until the window is exhausted.
  std::size_t weeks_per_step = 1;
};

/// Re-predicts `run`'s validation samples with the substitution window
/// taken from the previous year, restoring true weeks step by step.
ExperimentResult weather_sweep_run(const HoldoutRun& run, std::span<const CountyYearRecord> records,
                                   const SweepOptions& options, const ExperimentConfig& config);

/// Attribution of a holdout model over its validation samples.
AttributionReport attribute_holdout(const HoldoutRun& run, const AttributionOptions& options = {});

/// Canonical text of a configuration; hashed into every output.
std::string describe_config(const ExperimentConfig& config);
/// Hash of the record contents, so outputs are tied to their data.
std::string dataset_fingerprint(std::span<const CountyYearRecord> records);

/// metrics.json, predictions.csv, loss_curve.csv (neural models),
/// sweep.csv (sweeps), attribution.csv (subset runs), plus per-arm
/// predictions_<label>.csv when there is more than one arm.
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result);
std::string metrics_json(const ExperimentResult& result);
std::string predictions_csv(const ArmResult& arm, const ExperimentResult& result);
std::string loss_curve_csv(std::span<const LossCurveRow> curve, std::string_view comment);
std::string sweep_csv(const ExperimentResult& result);
/// "config_hash=<hash>,seed=<seed>"
std::string output_comment(const ExperimentResult& result);

}  // namespace yieldnet
