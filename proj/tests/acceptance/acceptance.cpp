// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cli.hpp"
#include "yieldnet/attribution.hpp"
#include "yieldnet/baselines.hpp"
#include "yieldnet/data.hpp"
#include "yieldnet/experiments.hpp"
#include "yieldnet/grad_check.hpp"
#include "yieldnet/io.hpp"
#include "yieldnet/log.hpp"
#include "yieldnet/ops.hpp"
#include "yieldnet/rng.hpp"
#include "yieldnet/synthetic.hpp"
#include "yieldnet/training.hpp"

namespace fs = std::filesystem;
using namespace yieldnet;
using ad::Tensor;
using ad::Var;

namespace {

// ---- pinned settings ------------------------------------------------------

constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 120.0;
constexpr std::size_t kGradPoints = 20;
constexpr double kOracleTol = 1e-12;
constexpr double kLassoTol = 1e-8;

constexpr int kTargetYear = 2000;
constexpr std::size_t kHeadlineIters = 20000;
constexpr double kHeadlineSeconds = 1200.0;
constexpr double kHeadlineGain = 0.20;  // CNN-RNN at least 20% below Average
constexpr std::size_t kProtocolIters = 5000;  // criteria 4, 6, 7

constexpr std::size_t kCausalHitsNeeded = 5;
constexpr double kSubsetSlack = 1.05;
constexpr double kSubsetBand = 1.25;
constexpr double kCvRatio = 1.5;
constexpr std::size_t kSweepRowsNeeded = 10;
constexpr std::size_t kDeterminismIters = 300;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---- fixture ---------------------------------------------------------------

SyntheticSpec fixture_spec() {
  SyntheticSpec spec;
  spec.counties = 60;
  spec.states = 4;
  spec.start_year = 1980;
  spec.end_year = 2000;
  spec.seed = 42;
  return spec;
}

ExperimentConfig experiment_config(ModelKind kind, std::size_t iters, const std::vector<CountyYearRecord>& records) {
  ExperimentConfig c;
  c.model = kind;
  c.settings.seed = 42;
  c.settings.network = CnnRnnConfig::for_crop(Crop::corn);
  c.settings.network.management_weeks = records.front().management.size();
  c.settings.train.max_iters = iters;
  return c;
}

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::element_count(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// ---- criterion 1 -----------------------------------------------------------

// Central differences over every parameter and input of a tiny network.
// A draw where some coordinate straddles a ReLU kink (one-sided differences
// disagree) is replaced by the next seed; the count is reported.
double full_model_check(std::uint64_t seed, std::size_t& nudges) {
  CnnRnnConfig config;
  config.window_years = 1;
  config.lstm_hidden = 3;
  config.fc_weather_out = 4;
  config.fc_soil_out = 3;
  config.management_weeks = 2;
  config.weather_convs = {{2, 3, true}, {2, 3, true}};
  config.soil_convs = {{2, 3, true}};
  const double eps = 1e-5;

  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(mix_seed(seed, attempt));
    auto model = build_cnn_rnn(config, mix_seed(seed, 1000 + attempt));
    for (std::size_t i = 0; i < model.params.size(); ++i)
      if (model.params.names[i].ends_with("bias"))
        for (double& v : model.params.tensors[i].values()) v = rng.uniform(-0.2, 0.2);
    ModelInput input;
    input.steps = config.steps();
    input.width = config.layout().size();
    input.values = as_vector(random_tensor({input.steps * input.width}, rng).values());

    ad::Tape tape;
    const ModelInput* batch[] = {&input};
    auto graph = cnn_rnn_graph(tape, model, batch);
    tape.backward(graph.predictions.back());
    const double f0 = graph.predictions.back().item();

    double worst = 0.0;
    bool kinked = false;
    auto probe = [&](double analytic, const std::function<double(double)>& eval) {
      const double fp = eval(eps), fm = eval(-eps);
      const double right = (fp - f0) / eps, left = (f0 - fm) / eps;
      if (std::abs(right - left) > kGradTol * std::max(1.0, std::abs(right))) {
        kinked = true;
        return;
      }
      const double numeric = (fp - fm) / (2 * eps);
      worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
    };
    for (std::size_t p = 0; p < model.params.size() && !kinked; ++p) {
      auto analytic = tape.grad(graph.params[p]);
      for (std::size_t i = 0; i < analytic.size() && !kinked; ++i) {
        probe(analytic[i], [&](double d) {
          auto m = model;
          m.params.tensors[p][i] += d;
          return cnn_rnn_forward(m, input).back();
        });
      }
    }
    for (std::size_t s = 0; s < input.steps && !kinked; ++s) {
      auto analytic = tape.grad(graph.step_inputs[s]);
      for (std::size_t f = 0; f < input.width && !kinked; ++f) {
        probe(analytic[f], [&](double d) {
          auto in = input;
          in.step(s)[f] += d;
          return cnn_rnn_forward(model, in).back();
        });
      }
    }
    if (!kinked) return worst;
    ++nudges;
  }
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  std::size_t nudges = 0;
  for (std::size_t point = 0; point < kGradPoints; ++point) {
    Rng rng(mix_seed(0xC1, point));
    auto proj = [&](std::size_t n) { return as_vector(random_tensor({n}, rng).values()); };
    auto record = [&](const std::string& name, double err) { worst[name] = std::max(worst[name], err); };

    {
      auto w = proj(4 * 9);
      record("conv1d", ad::grad_check([&](ad::Tape&, std::span<const Var> v) { return ad::dot(ad::conv1d(v[0], v[1], v[2]), w); },
                                      {random_tensor({3, 9}, rng), random_tensor({4, 3, 3}, rng), random_tensor({4}, rng)})
                           .max_relative_error);
    }
    {
      auto w = proj(3 * 4);
      record("avgpool1d", ad::grad_check([&](ad::Tape&, std::span<const Var> v) { return ad::dot(ad::avgpool1d(v[0]), w); },
                                         {random_tensor({3, 9}, rng)})
                              .max_relative_error);
    }
    {
      auto w = proj(5);
      record("affine", ad::grad_check([&](ad::Tape&, std::span<const Var> v) { return ad::dot(ad::affine(v[0], v[1], v[2]), w); },
                                      {random_tensor({6}, rng), random_tensor({5, 6}, rng), random_tensor({5}, rng)})
                           .max_relative_error);
    }
    {
      // Inputs kept at least 1e-2 away from the kink at 0.
      auto x = random_tensor({12}, rng, 0.01, 1.0);
      for (double& v : x.values()) v = rng.uniform() < 0.5 ? -v : v;
      auto w = proj(12);
      record("relu", ad::grad_check([&](ad::Tape&, std::span<const Var> v) { return ad::dot(ad::relu(v[0]), w); }, {x})
                         .max_relative_error);
    }
    {
      auto w = proj(9);
      record("concat", ad::grad_check([&](ad::Tape&, std::span<const Var> v) {
                         return ad::dot(ad::concat({v[0], v[1], v[2]}), w);
                       },
                                      {random_tensor({2}, rng), random_tensor({3}, rng), random_tensor({4}, rng)})
                           .max_relative_error);
    }
    {
      auto wh = proj(4), wc = proj(4);
      record("lstm_cell_step",
             ad::grad_check(
                 [&](ad::Tape&, std::span<const Var> v) {
                   auto s = ad::lstm_cell_step(v[0], v[1], v[2], ad::LstmParams{v[3], v[4]});
                   return ad::add(ad::dot(s.h, wh), ad::dot(s.c, wc));
                 },
                 {random_tensor({5}, rng), random_tensor({4}, rng), random_tensor({4}, rng), random_tensor({16, 9}, rng),
                  random_tensor({16}, rng)})
                 .max_relative_error);
    }
    record("cnn_rnn_forward", full_model_check(mix_seed(0xF0, point), nudges));
  }
  const double elapsed = seconds_since(t0);
  bool pass = elapsed < kGradSeconds;
  std::string detail;
  for (const auto& [name, err] : worst) {
    pass = pass && err < kGradTol;
    detail += name + "=" + fmt(err, 3) + " ";
  }
  detail += "(max rel err over " + std::to_string(kGradPoints) + " points, tol " + fmt(kGradTol) + "; " +
            std::to_string(nudges) + " kink nudges; " + fmt(elapsed, 3) + "s, limit " + fmt(kGradSeconds) + "s)";
  return {pass, detail};
}

// ---- criterion 2 -----------------------------------------------------------

std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t c_in = x.extent(0), len = x.extent(1), c_out = w.extent(0), k = w.extent(2);
  const long pad = static_cast<long>((k - 1) / 2);
  std::vector<double> y(c_out * len);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t t = 0; t < len; ++t) {
      double acc = b[o];
      for (std::size_t c = 0; c < c_in; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long pos = static_cast<long>(t + j) - pad;
          if (pos >= 0 && pos < static_cast<long>(len)) acc += w[(o * c_in + c) * k + j] * x[c * len + pos];
        }
      y[o * len + t] = acc;
    }
  return y;
}

double rmse_oracle(const std::vector<double>& p, const std::vector<double>& t) {
  long double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += static_cast<long double>(p[i] - t[i]) * (p[i] - t[i]);
  return static_cast<double>(std::sqrt(s / p.size()));
}

double pearson_oracle(const std::vector<double>& p, const std::vector<double>& t) {
  long double mp = 0, mt = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    mt += t[i];
  }
  mp /= p.size();
  mt /= t.size();
  for (std::size_t i = 0; i < p.size(); ++i) {
    sxy += (p[i] - mp) * (t[i] - mt);
    sxx += (p[i] - mp) * (p[i] - mp);
    syy += (t[i] - mt) * (t[i] - mt);
  }
  return static_cast<double>(100.0L * sxy / std::sqrt(sxx * syy));
}

Outcome criterion2() {
  double conv_err = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(mix_seed(0xC2, s));
    const std::size_t c_in = 1 + s % 6, c_out = 1 + (s * 7) % 8, k = s % 3 == 0 ? 5 : 3, len = 9 + s;
    auto x = random_tensor({c_in, len}, rng), w = random_tensor({c_out, c_in, k}, rng), b = random_tensor({c_out}, rng);
    ad::Tape tape;
    auto y = as_vector(ad::conv1d(tape.input(x), tape.input(w), tape.input(b)).value());
    auto ref = conv_oracle(x, w, b);
    for (std::size_t i = 0; i < y.size(); ++i) conv_err = std::max(conv_err, std::abs(y[i] - ref[i]));
  }

  double lasso_err = 0.0;
  {
    // Full shrinkage: zero coefficients, intercept at mean(y).
    std::vector<std::vector<double>> x = {{1, -1}, {-1, 1}, {1, 1}, {-1, -1}};
    std::vector<double> y{101, 97, 120, 90};
    auto m = fit_lasso(x, y, 1e6);
    for (double b : m.coefficients) lasso_err = std::max(lasso_err, std::abs(b));
    lasso_err = std::max(lasso_err, std::abs(m.intercept - 102.0));
  }
  {
    // Orthonormal design with lambda 0: beta = X^T y / n.
    std::vector<std::vector<double>> x = {{1, 1, 1}, {-1, 1, -1}, {1, -1, -1}, {-1, -1, 1}};
    std::vector<double> y{3.0, -1.0, 4.0, 0.5};
    auto m = fit_lasso(x, y, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      double ols = 0;
      for (std::size_t i = 0; i < 4; ++i) ols += x[i][j] * y[i] / 4.0;
      lasso_err = std::max(lasso_err, std::abs(m.coefficients[j] - ols));
    }
  }
  {
    // <x, y> / n = 2 and lambda 0.5: S(2.0, 0.5) = 1.5.
    std::vector<std::vector<double>> x = {{1}, {-1}, {1}, {-1}};
    std::vector<double> y{2, -2, 2, -2};
    lasso_err = std::max(lasso_err, std::abs(fit_lasso(x, y, 0.5).coefficients[0] - 1.5));
  }

  double metric_err = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(mix_seed(0xC3, s));
    std::vector<double> p(40 + s), t(40 + s);
    for (std::size_t i = 0; i < p.size(); ++i) {
      t[i] = rng.uniform(80, 220);
      p[i] = 0.7 * t[i] + rng.normal(30, 10);
    }
    metric_err = std::max(metric_err, std::abs(rmse(p, t) - rmse_oracle(p, t)));
    metric_err = std::max(metric_err, std::abs(pearson_corr(p, t) - pearson_oracle(p, t)));
  }
  const bool pass = conv_err < kOracleTol && lasso_err < kLassoTol && metric_err < kOracleTol;
  return {pass, "conv1d max abs err " + fmt(conv_err, 3) + " (tol " + fmt(kOracleTol) + "), lasso " + fmt(lasso_err, 3) +
                    " (tol " + fmt(kLassoTol) + "), rmse/pearson " + fmt(metric_err, 3) + " (tol " + fmt(kOracleTol) + ")"};
}

// ---- shared state for the fixture criteria -----------------------------------

struct Suite {
  fs::path out;
  std::vector<CountyYearRecord> records;
  std::optional<HoldoutRun> cnn;  // 20k-iteration headline model
  std::optional<HoldoutRun> average;
  std::optional<HoldoutRun> lasso;
  std::optional<HoldoutRun> protocol;
  double cnn_seconds = 0.0;

  void ensure_fixture() {
    if (!records.empty()) return;
    records = gen_synthetic(fixture_spec()).records;
  }

  void ensure_headline() {
    ensure_fixture();
    if (cnn) return;
    const auto t0 = Clock::now();
    cnn = temporal_holdout(records, kTargetYear, experiment_config(ModelKind::cnn_rnn, kHeadlineIters, records));
    cnn_seconds = seconds_since(t0);
    write_experiment_outputs(out / "headline_cnn_rnn", cnn->result);
    average = temporal_holdout(records, kTargetYear, experiment_config(ModelKind::average, 0, records));
    write_experiment_outputs(out / "headline_average", average->result);
    lasso = temporal_holdout(records, kTargetYear, experiment_config(ModelKind::lasso, 0, records));
    write_experiment_outputs(out / "headline_lasso", lasso->result);
  }
};

Outcome criterion3(Suite& s) {
  s.ensure_headline();
  const double cnn = s.cnn->result.headline().validation.rmse;
  const double avg = s.average->result.headline().validation.rmse;
  const double lasso = s.lasso->result.headline().validation.rmse;
  const bool a = cnn <= (1.0 - kHeadlineGain) * avg;
  const bool b = cnn < lasso;
  const bool t = s.cnn_seconds < kHeadlineSeconds;
  return {a && b && t, "validation RMSE at " + std::to_string(kTargetYear) + ": cnn-rnn " + fmt(cnn) + ", average " +
                           fmt(avg) + " (need cnn <= " + fmt(1.0 - kHeadlineGain) + " x avg = " +
                           fmt((1.0 - kHeadlineGain) * avg) + "), lasso " + fmt(lasso) + "; " +
                           std::to_string(kHeadlineIters) + " iters in " + fmt(s.cnn_seconds, 4) + "s (limit " +
                           fmt(kHeadlineSeconds) + "s)"};
}

Outcome criterion4(Suite& s) {
  auto spec = fixture_spec();
  spec.alpha = spec.beta = spec.gamma = 0.0;
  auto records = gen_synthetic(spec).records;
  auto m = ablation_run(records, AblationSource::management, kTargetYear,
                        experiment_config(ModelKind::cnn_rnn, kProtocolIters, records));
  auto avg = temporal_holdout(records, kTargetYear, experiment_config(ModelKind::average, 0, records));
  write_experiment_outputs(s.out / "trend_ablation_M", m.result);
  write_experiment_outputs(s.out / "trend_average", avg.result);
  const double rm = m.result.headline().validation.rmse, ra = avg.result.headline().validation.rmse;
  return {rm < ra, "trend-only fixture (alpha=beta=gamma=0, trend " + fmt(spec.trend) + "): CNN-RNN(M) RMSE " + fmt(rm) +
                       " vs average " + fmt(ra) + " (" + std::to_string(kProtocolIters) + " iters)"};
}

std::size_t causal_hits(std::span<const double> importance, const FeatureLayout& layout, std::size_t first_week,
                        std::size_t last_week) {
  std::vector<std::size_t> weather;
  for (std::size_t f = 0; f < importance.size(); ++f)
    if (layout.group_of(f) == FeatureGroup::weather) weather.push_back(f);
  std::stable_sort(weather.begin(), weather.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  const std::size_t window = last_week - first_week + 1;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < window && i < weather.size(); ++i) {
    const std::size_t f = weather[i];
    const std::size_t var = f / kWeeks, week = f % kWeeks + 1;
    if (var == kPrecipitation && week >= first_week && week <= last_week) ++hits;
  }
  return hits;
}

Outcome criterion5(Suite& s) {
  s.ensure_headline();
  const auto spec = fixture_spec();
  const auto first = static_cast<std::size_t>(spec.precip_first_week);
  const auto last = static_cast<std::size_t>(spec.precip_last_week);
  const std::size_t window = last - first + 1;

  auto report = attribute_holdout(*s.cnn);
  write_file_atomic(s.out / "attribution.csv", attribution_csv(report, output_comment(s.cnn->result)));
  const std::size_t hits = causal_hits(report.raw, report.layout, first, last);

  std::string top;
  for (std::size_t f : top_features(report, FeatureGroup::weather, window)) top += report.layout.describe(f) + "; ";

  // Diagnostics only: the same ranking from the prediction head, with guided
  // and with plain gradients.
  AttributionOptions head;
  head.from_head = true;
  const std::size_t head_hits = causal_hits(attribute_holdout(*s.cnn, head).raw, report.layout, first, last);
  const auto& model = std::get<CnnRnnModel>(s.cnn->model);
  auto inputs = model.inputs.prepare(s.cnn->validation);
  std::vector<double> plain(report.layout.size(), 0.0);
  for (const auto& in : inputs) {
    ad::Tape tape;
    const ModelInput* one[] = {&in};
    auto graph = cnn_rnn_graph(tape, model, one);
    tape.backward(graph.predictions.back());
    auto g = tape.grad(graph.step_inputs.back());
    for (std::size_t f = 0; f < g.size(); ++f) plain[f] += std::abs(g[f]);
  }
  const std::size_t plain_hits = causal_hits(plain, report.layout, first, last);

  return {hits >= kCausalHitsNeeded,
          std::to_string(hits) + "/" + std::to_string(window) + " causal precipitation weeks in the top-" +
              std::to_string(window) + " weather features (need " + std::to_string(kCausalHitsNeeded) + "); top: " + top +
              "[diagnostic: head-seeded guided " + std::to_string(head_hits) + "/" + std::to_string(window) +
              ", plain gradient " + std::to_string(plain_hits) + "/" + std::to_string(window) + "]"};
}

// 5000-iteration holdout shared by criteria 6 and 7.
const HoldoutRun& ensure_protocol_holdout(Suite& s) {
  s.ensure_fixture();
  if (!s.protocol) {
    s.protocol =
        temporal_holdout(s.records, kTargetYear, experiment_config(ModelKind::cnn_rnn, kProtocolIters, s.records));
    write_experiment_outputs(s.out / "protocol_holdout", s.protocol->result);
  }
  return *s.protocol;
}

Outcome criterion6(Suite& s) {
  const auto& full = ensure_protocol_holdout(s);
  SubsetOptions options;
  options.select_year = kTargetYear - 1;
  options.eval_year = kTargetYear;
  options.fractions = {1.0, 0.75, 0.5};
  options.full_run = &full;
  auto result = feature_subset_run(s.records, options, experiment_config(ModelKind::cnn_rnn, kProtocolIters, s.records));
  write_experiment_outputs(s.out / "feature_subset", result);
  const double r100 = result.arms[0].validation.rmse, r75 = result.arms[1].validation.rmse,
               r50 = result.arms[2].validation.rmse;
  const bool pass = r100 <= r75 && r75 <= kSubsetSlack * r50 && r75 <= kSubsetBand * r100;
  return {pass, "RMSE 100% " + fmt(r100) + ", 75% " + fmt(r75) + ", 50% " + fmt(r50) + " (need 100% <= 75% <= " +
                    fmt(kSubsetSlack) + " x 50% = " + fmt(kSubsetSlack * r50) + ", 75% <= " + fmt(kSubsetBand) +
                    " x 100% = " + fmt(kSubsetBand * r100) + "; " + std::to_string(kProtocolIters) + " iters)"};
}

Outcome criterion7(Suite& s) {
  const auto& holdout = ensure_protocol_holdout(s);
  auto cv = kfold_location_cv(s.records, kTargetYear, 5, experiment_config(ModelKind::cnn_rnn, kProtocolIters, s.records));
  write_experiment_outputs(s.out / "location_cv", cv);
  const double rc = cv.headline().validation.rmse, rh = holdout.result.headline().validation.rmse;
  return {rc <= kCvRatio * rh, "5-fold leave-location-out RMSE " + fmt(rc) + " vs temporal holdout " + fmt(rh) +
                                   " (ratio " + fmt(rc / rh, 4) + ", limit " + fmt(kCvRatio) + "; " +
                                   std::to_string(kProtocolIters) + " iters)"};
}

Outcome criterion8(Suite& s) {
  s.ensure_headline();
  auto sweep = weather_sweep_run(*s.cnn, s.records, SweepOptions{},
                                 experiment_config(ModelKind::cnn_rnn, kHeadlineIters, s.records));
  const fs::path dir = s.out / "weather_sweep";
  write_experiment_outputs(dir, sweep);
  const auto table = read_csv(dir / "sweep.csv");
  const std::size_t rows = table.rows.size();
  const double zero = sweep.sweep.front().rmse, full = sweep.sweep.back().rmse;
  return {full < zero && rows >= kSweepRowsNeeded,
          "RMSE zero weeks updated " + fmt(zero) + ", all " + std::to_string(sweep.sweep.back().weeks_updated) +
              " weeks updated " + fmt(full) + "; sweep.csv rows " + std::to_string(rows) + " (need >= " +
              std::to_string(kSweepRowsNeeded) + ")"};
}

Outcome criterion9(Suite& s) {
  TrainConfig tc;
  const bool lr = lr_schedule(0, tc) == 3e-4 && lr_schedule(60000, tc) == 1.5e-4 && lr_schedule(120000, tc) == 7.5e-5;
  std::vector<double> days(365);
  for (std::size_t d = 0; d < days.size(); ++d) days[d] = static_cast<double>(d + 1);
  const auto weeks = weekly_average(days);
  const bool weekly = weeks.size() == 52 && weeks.front() == 4.0 && weeks.back() == 361.5;

  s.ensure_fixture();
  // Average baseline from its own cheap run; criterion 3 reuses the same call.
  const auto avg = s.average ? *s.average
                             : temporal_holdout(s.records, kTargetYear, experiment_config(ModelKind::average, 0, s.records));
  const double corr = avg.result.headline().validation.correlation;
  return {lr && weekly && corr == 0.0,
          "lr_schedule(0, 60000, 120000) = " + fmt(lr_schedule(0, tc)) + ", " + fmt(lr_schedule(60000, tc)) + ", " +
              fmt(lr_schedule(120000, tc)) + "; average correlation " + fmt(corr) + "; weekly_average 365 -> " +
              std::to_string(weeks.size()) + " (week 1 " + fmt(weeks.front()) + ", week 52 " + fmt(weeks.back()) + ")"};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "yieldnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

Outcome criterion10(Suite& s) {
  const fs::path base = s.out / "determinism";
  fs::remove_all(base);
  const auto spec = fixture_spec();
  const std::string data = (base / "data").string();
  bool ok = cli({"gen-synthetic", "--counties", std::to_string(spec.counties), "--states", std::to_string(spec.states),
                 "--years", "1980:2000", "--seed", "42", "--out", data}) == 0;

  struct Run {
    std::string name;
    std::vector<std::string> args;
  };
  const std::vector<Run> runs = {
      {"holdout-cnn-rnn",
       {"experiment", "holdout", "--model", "cnn-rnn", "--iters", std::to_string(kDeterminismIters), "--year", "2000"}},
      {"cv-rf", {"experiment", "cv", "--model", "rf", "--trees", "10", "--year", "2000"}},
  };
  std::string detail;
  for (const auto& run : runs) {
    std::string first_metrics, first_preds;
    bool same = true;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = base / (run.name + "-" + std::to_string(rep));
      auto args = run.args;
      args.insert(args.end(), {"--data", data, "--out", out.string()});
      ok = ok && cli(args) == 0;
      if (!ok) break;
      const auto metrics = read_file(out / "metrics.json"), preds = read_file(out / "predictions.csv");
      if (rep == 0) {
        first_metrics = metrics;
        first_preds = preds;
      } else {
        same = metrics == first_metrics && preds == first_preds;
      }
    }
    ok = ok && same;
    detail += run.name + (same ? " identical; " : " DIFFERS; ");
  }
  return {ok, detail + "metrics.json and predictions.csv compared byte for byte"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-10"};
  std::vector<int> only;
  std::vector<int> known;
  std::string out = "acceptance_out";
  app.add_option("--only", only, "Run just these criteria");
  app.add_option("--known-failure", known,
                 "Criteria expected to fail; still printed as FAIL but not counted in the exit status");
  app.add_option("--out", out, "Directory for experiment outputs");
  CLI11_PARSE(app, argc, argv);

  set_log_sink([](LogLevel level, const std::string& m) {
    if (level == LogLevel::warning && m.find("fit_lasso") == std::string::npos) std::cerr << "warning: " << m << "\n";
  });

  Suite suite;
  suite.out = out;
  fs::create_directories(suite.out);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient checks", [] { return criterion1(); }},
      {"oracle equivalence", [] { return criterion2(); }},
      {"synthetic end-to-end", [&] { return criterion3(suite); }},
      {"trend capture", [&] { return criterion4(suite); }},
      {"attribution recovery", [&] { return criterion5(suite); }},
      {"feature-subset monotonicity", [&] { return criterion6(suite); }},
      {"leave-location-out", [&] { return criterion7(suite); }},
      {"weather sweep", [&] { return criterion8(suite); }},
      {"schedule and conventions", [&] { return criterion9(suite); }},
      {"determinism", [&] { return criterion10(suite); }},
  };

  int unexpected = 0, passed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    ++ran;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool is_known = std::find(known.begin(), known.end(), id) != known.end();
    std::printf("criterion %2d: %s  %s: %s [%.1fs]%s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0), !o.pass && is_known ? " (known failure)" : "");
    std::fflush(stdout);
    if (o.pass) {
      ++passed;
    } else if (!is_known) {
      ++unexpected;
    }
  }
  std::printf("%d/%d criteria passed\n", passed, ran);
  return unexpected == 0 ? 0 : 1;
}
