#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "yieldnet/error.hpp"
#include "yieldnet/experiments.hpp"
#include "yieldnet/io.hpp"
#include "yieldnet/synthetic.hpp"

using namespace yieldnet;

namespace {

// Written independently of the library: two-pass formulas in long double.
double rmse_ref(const std::vector<double>& p, const std::vector<double>& t) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (long double)(p[i] - t[i]) * (p[i] - t[i]);
  return static_cast<double>(std::sqrt(s / p.size()));
}

double pearson_ref(const std::vector<double>& p, const std::vector<double>& t) {
  long double mp = 0, mt = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mt += t[i];
  }
  mp /= p.size();
  mt /= t.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sxy += (p[i] - mp) * (t[i] - mt);
    sxx += (p[i] - mp) * (p[i] - mp);
    syy += (t[i] - mt) * (t[i] - mt);
  }
  return static_cast<double>(100.0L * sxy / std::sqrt(sxx * syy));
}

std::vector<CountyYearRecord> fixture_records(std::uint64_t seed = 7) { return gen_synthetic(testing::small_spec(seed)).records; }

ExperimentConfig config_for(ModelKind kind, std::size_t iters = 20) {
  ExperimentConfig c;
  c.model = kind;
  c.settings.train.max_iters = iters;
  c.settings.train.curve_every = 10;
  c.settings.forest.n_trees = 5;
  return c;
}

}  // namespace

TEST_CASE("rmse and pearson_corr examples") {
  const std::vector<double> a{1, 2}, b{3, 2};
  CHECK(rmse(a, a) == 0.0);
  CHECK(std::abs(rmse(a, b) - std::sqrt(2.0)) < 1e-15);
  const std::vector<double> truth{1, 5, 2, 8};
  const std::vector<double> mean(4, 4.0);
  CHECK(std::abs(rmse(mean, truth) - std::sqrt((9.0 + 1 + 4 + 16) / 4)) < 1e-15);

  const std::vector<double> x{1, 2, 3}, y{2, 4, 6};
  CHECK(std::abs(pearson_corr(x, x) - 100.0) < 1e-12);
  CHECK(std::abs(pearson_corr(x, y) - 100.0) < 1e-12);
  CHECK(pearson_corr(std::vector<double>{5, 5, 5}, y) == 0.0);
  CHECK_THROWS_AS(pearson_corr(std::vector<double>{1}, std::vector<double>{1}), ContractViolation);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ContractViolation);
}

TEST_CASE("rmse and pearson_corr agree with an independent reimplementation") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto p = testing::random_tensor({50 + seed}, seed, 50, 250);
    auto t = testing::random_tensor({50 + seed}, 1000 + seed, 50, 250);
    std::vector<double> pv(p.values().begin(), p.values().end()), tv(t.values().begin(), t.values().end());
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] = 0.6 * pv[i] + 0.4 * tv[i];
    CHECK(std::abs(rmse(pv, tv) - rmse_ref(pv, tv)) < 1e-12);
    CHECK(std::abs(pearson_corr(pv, tv) - pearson_ref(pv, tv)) < 1e-12);
  }
}

TEST_CASE("location_folds") {
  std::vector<int> counties{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto folds = location_folds(counties, 5, 42);
  REQUIRE(folds.size() == 5);
  std::multiset<int> seen;
  for (const auto& f : folds) {
    CHECK(f.size() == 2);
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen == std::multiset<int>(counties.begin(), counties.end()));
  CHECK(location_folds(counties, 5, 42) == folds);

  auto uneven = location_folds({1, 2, 3, 4, 5, 6, 7}, 3, 1);
  CHECK(uneven[0].size() == 3);
  CHECK(uneven[1].size() == 2);
  CHECK(uneven[2].size() == 2);
  CHECK_THROWS_AS(location_folds({1, 2, 3}, 5, 1), DataError);
}

TEST_CASE("temporal_holdout: average model conventions") {
  auto records = fixture_records();
  auto run = temporal_holdout(records, 1989, config_for(ModelKind::average));
  const auto& arm = run.result.headline();
  CHECK(arm.validation.correlation == 0.0);
  CHECK(arm.train.correlation == 0.0);
  CHECK(arm.validation.count == 12);

  auto split = make_holdout_split(records, 1989, config_for(ModelKind::average));
  double mean = 0;
  for (const auto& s : split.train) mean += *s.target;
  mean /= static_cast<double>(split.train.size());
  std::vector<double> truths, preds;
  for (const auto& row : arm.predictions) {
    truths.push_back(*row.truth);
    preds.push_back(row.prediction);
    CHECK(row.prediction == doctest::Approx(mean).epsilon(1e-14));
  }
  CHECK(std::abs(arm.validation.rmse - rmse_ref(std::vector<double>(truths.size(), mean), truths)) < 1e-9);
}

TEST_CASE("temporal_holdout needs history before the validation year") {
  auto records = fixture_records();
  CHECK_THROWS_AS(temporal_holdout(records, 1985, config_for(ModelKind::average)), DataError);
}

TEST_CASE("holdout split: validation truths are sealed") {
  auto records = fixture_records();
  auto config = config_for(ModelKind::cnn_rnn, 15);
  auto split = make_holdout_split(records, 1989, config);
  for (const auto& s : split.train) CHECK(s.target_year < 1989);
  for (const auto& s : split.validation) {
    CHECK(s.target_year == 1989);
    CHECK_FALSE(s.target.has_value());
    for (const auto& r : s.window) {
      const bool sealed_yield = r.year == 1989 && r.yield.has_value();
      CHECK_FALSE(sealed_yield);
    }
  }
  CHECK(split.sealed.size() == 12);

  auto changed = records;
  for (auto& r : changed)
    if (r.year == 1989) *r.yield += 500.0;
  auto base_run = temporal_holdout(records, 1989, config);
  auto changed_run = temporal_holdout(changed, 1989, config);
  const auto& a = base_run.result.headline().predictions;
  const auto& b = changed_run.result.headline().predictions;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prediction == b[i].prediction);
    CHECK(*b[i].truth == *a[i].truth + 500.0);
  }
  CHECK(base_run.result.headline().train.rmse == changed_run.result.headline().train.rmse);
}

TEST_CASE("sealed targets only open for finite predictions") {
  SealedTargets sealed;
  sealed.seal({1, 2000}, 150.0);
  CHECK(sealed.reveal({{{1, 2000}, 140.0}}).at({1, 2000}) == 150.0);
  CHECK(sealed.reveals() == 1);
  CHECK_THROWS_AS(sealed.reveal({}), ContractViolation);
  CHECK_THROWS_AS(sealed.reveal({{{1, 2000}, std::nan("")}}), ContractViolation);
}

TEST_CASE("kfold_location_cv: partition and pooled recomputation") {
  auto records = fixture_records();
  auto result = kfold_location_cv(records, 1989, 4, config_for(ModelKind::lasso));
  REQUIRE(result.arms.size() == 5);
  CHECK(result.headline().label == "pooled");

  std::set<int> counties;
  double sq = 0;
  std::size_t n = 0;
  for (std::size_t f = 1; f < result.arms.size(); ++f) {
    for (const auto& row : result.arms[f].predictions) {
      CHECK(counties.insert(row.county_id).second);
      sq += std::pow(row.prediction - *row.truth, 2);
      ++n;
    }
  }
  CHECK(counties.size() == 12);
  CHECK(n == result.headline().predictions.size());
  CHECK(std::abs(result.headline().validation.rmse - std::sqrt(sq / static_cast<double>(n))) < 1e-9);
}

TEST_CASE("ablation_run: AVG correlation and a shared validation set") {
  auto records = fixture_records();
  auto config = config_for(ModelKind::cnn_rnn, 10);
  auto avg = ablation_run(records, AblationSource::average, 1989, config);
  CHECK(avg.result.headline().validation.correlation == 0.0);
  auto weather = ablation_run(records, AblationSource::weather, 1989, config);
  auto full = temporal_holdout(records, 1989, config);
  auto keys = [](const ArmResult& arm) {
    std::vector<std::pair<int, int>> k;
    for (const auto& r : arm.predictions) k.emplace_back(r.county_id, r.year);
    return k;
  };
  CHECK(keys(avg.result.headline()) == keys(full.result.headline()));
  CHECK(keys(weather.result.headline()) == keys(full.result.headline()));

  FeatureLayout layout;
  auto mask = ablation_mask(AblationSource::management, layout);
  for (std::size_t f = 0; f < layout.size(); ++f) {
    const bool kept = layout.group_of(f) == FeatureGroup::management || f == layout.avg_yield_index();
    CHECK(mask[f] == (kept ? 1 : 0));
  }
  CHECK(parse_ablation_source("W") == AblationSource::weather);
  CHECK(parse_ablation_source("AVG") == AblationSource::average);
}

TEST_CASE("feature_subset_run: identity mask and selection isolation") {
  auto records = fixture_records();
  auto config = config_for(ModelKind::cnn_rnn, 10);
  SubsetOptions options;
  options.select_year = 1988;
  options.eval_year = 1989;
  options.fractions = {1.0, 0.5};
  auto result = feature_subset_run(records, options, config);
  REQUIRE(result.arms.size() == 2);
  auto plain = temporal_holdout(records, 1989, config);
  CHECK(result.arms[0].validation.rmse == plain.result.headline().validation.rmse);
  for (std::size_t i = 0; i < plain.result.headline().predictions.size(); ++i)
    CHECK(result.arms[0].predictions[i].prediction == plain.result.headline().predictions[i].prediction);
  REQUIRE(result.attribution.has_value());

  auto changed = records;
  for (auto& r : changed) {
    if (r.year != 1989) continue;
    *r.yield *= 2.0;
    for (double& w : r.weather) w += 3.0;
  }
  auto other = feature_subset_run(changed, options, config);
  CHECK(other.attribution->raw == result.attribution->raw);

  options.select_year = 1989;
  CHECK_THROWS_AS(feature_subset_run(records, options, config), ContractViolation);
}

TEST_CASE("weather_sweep_run: endpoints") {
  auto records = fixture_records();
  auto config = config_for(ModelKind::lasso);
  auto run = temporal_holdout(records, 1989, config);
  SweepOptions options;
  options.weeks_per_step = 3;
  auto sweep = weather_sweep_run(run, records, options, config);
  REQUIRE(sweep.sweep.size() >= 2);
  CHECK(sweep.sweep.front().weeks_updated == 0);
  CHECK(sweep.sweep.back().weeks_updated == 18);
  // Full update restores the true weather.
  CHECK(sweep.sweep.back().rmse == run.result.headline().validation.rmse);

  auto split = make_holdout_split(records, 1989, config);
  RecordIndex index(records);
  std::set<int> window;
  for (int w = 22; w <= 39; ++w) window.insert(w);
  auto zero = split.validation;
  for (auto& s : zero) substitute_weather(s, index.find(s.county_id, 1988, Crop::corn), window);
  auto preds = predict(run.model, zero);
  std::map<std::pair<int, int>, double> keyed;
  for (std::size_t i = 0; i < zero.size(); ++i) keyed[{zero[i].county_id, 1989}] = preds[i];
  auto truths = split.sealed.reveal(keyed);
  std::vector<double> p, t;
  for (const auto& [k, v] : keyed) {
    p.push_back(v);
    t.push_back(truths.at(k));
  }
  CHECK(std::abs(sweep.sweep.front().rmse - rmse_ref(p, t)) < 1e-9);
}

TEST_CASE("outputs are stamped and deterministic") {
  auto records = fixture_records();
  auto config = config_for(ModelKind::lasso);
  auto a = temporal_holdout(records, 1989, config);
  auto b = temporal_holdout(records, 1989, config);
  CHECK(metrics_json(a.result) == metrics_json(b.result));
  CHECK(predictions_csv(a.result.headline(), a.result) == predictions_csv(b.result.headline(), b.result));
  CHECK(a.result.config_hash.size() == 16);
  CHECK(predictions_csv(a.result.headline(), a.result).rfind("#" + output_comment(a.result), 0) == 0);
  CHECK(metrics_json(a.result).find("runtime") == std::string::npos);

  auto other = config;
  other.settings.seed = 43;
  CHECK(temporal_holdout(records, 1989, other).result.config_hash != a.result.config_hash);

  auto dir = std::filesystem::temp_directory_path() / "yieldnet_test_outputs";
  std::filesystem::remove_all(dir);
  write_experiment_outputs(dir, a.result);
  CHECK(std::filesystem::exists(dir / "metrics.json"));
  CHECK(std::filesystem::exists(dir / "predictions.csv"));
  CHECK(read_file(dir / "metrics.json") == metrics_json(a.result));
  std::filesystem::remove_all(dir);
}
