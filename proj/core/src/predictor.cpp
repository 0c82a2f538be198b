#include "yieldnet/predictor.hpp"

#include <algorithm>
#include <cmath>

#include "yieldnet/error.hpp"

namespace yieldnet {
namespace {

std::vector<double> targets_of(std::span<const SequenceSample> samples) {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) {
    require(s.target.has_value(), "training sample without a target yield");
    y.push_back(*s.target);
  }
  return y;
}

InputPipeline baseline_pipeline(std::span<const SequenceSample> train, const ModelSettings& settings) {
  const FeatureLayout layout{train.front().target_record().management.size()};
  return fit_input_pipeline(train, layout, settings.keep);
}

std::vector<std::vector<double>> flat_rows(const InputPipeline& pipeline, std::span<const SequenceSample> samples) {
  std::vector<std::vector<double>> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) rows.push_back(pipeline.prepare_flat(s));
  return rows;
}

double selection_error(std::span<const SequenceSample> inner_train, std::span<const SequenceSample> inner_val,
                       const ModelSettings& settings, double lambda) {
  const InputPipeline pipeline = baseline_pipeline(inner_train, settings);
  const LassoModel model = fit_lasso(flat_rows(pipeline, inner_train), targets_of(inner_train), lambda);
  double sq = 0.0;
  for (const auto& s : inner_val) {
    const double d = model.predict(pipeline.prepare_flat(s)) - *s.target;
    sq += d * d;
  }
  return sq / static_cast<double>(inner_val.size());
}

double choose_lambda(std::span<const SequenceSample> train, const ModelSettings& settings) {
  require(!settings.lasso_grid.empty(), "lasso grid is empty");
  if (settings.lasso_grid.size() == 1) return settings.lasso_grid.front();
  int last_year = train.front().target_year;
  for (const auto& s : train) last_year = std::max(last_year, s.target_year);
  std::vector<SequenceSample> inner_train, inner_val;
  for (const auto& s : train) (s.target_year < last_year ? inner_train : inner_val).push_back(s);
  if (inner_train.size() < 2 || inner_val.empty()) return settings.lasso_grid.front();

  double best_lambda = settings.lasso_grid.front();
  double best_error = std::numeric_limits<double>::infinity();
  for (double lambda : settings.lasso_grid) {
    const double error = selection_error(inner_train, inner_val, settings, lambda);
    if (error < best_error) {
      best_error = error;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::cnn_rnn: return "cnn-rnn";
    case ModelKind::dfnn: return "dfnn";
    case ModelKind::rf: return "rf";
    case ModelKind::lasso: return "lasso";
    case ModelKind::average: return "average";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind k : {ModelKind::cnn_rnn, ModelKind::dfnn, ModelKind::rf, ModelKind::lasso, ModelKind::average})
    if (model_kind_name(k) == text) return k;
  throw ContractViolation("unknown model kind '" + std::string(text) +
                          "' (expected cnn-rnn, dfnn, rf, lasso or average)");
}

ModelKind kind_of(const TrainedModel& model) {
  constexpr ModelKind kinds[] = {ModelKind::cnn_rnn, ModelKind::dfnn, ModelKind::lasso, ModelKind::rf,
                                 ModelKind::average};
  return kinds[model.index()];
}

FitResult fit_model(ModelKind kind, std::span<const SequenceSample> train, const ModelSettings& settings,
                    std::span<const SequenceSample> monitor) {
  require(!train.empty(), "training set is empty");
  FitResult result;
  switch (kind) {
    case ModelKind::cnn_rnn: {
      CnnRnnModel model = build_cnn_rnn(settings.network, settings.seed);
      model.inputs.keep = settings.keep;
      TrainConfig config = settings.train;
      config.seed = settings.seed;
      result.report = train_cnn_rnn(model, train, config, monitor);
      result.model = std::move(model);
      break;
    }
    case ModelKind::dfnn: {
      DfnnConfig dc;
      dc.input_dim = FeatureLayout{train.front().target_record().management.size()}.size();
      DfnnModel model = build_dfnn(dc, settings.seed);
      model.inputs.keep = settings.keep;
      TrainConfig config = settings.train;
      config.seed = settings.seed;
      result.report = train_dfnn(model, train, config, monitor);
      result.model = std::move(model);
      break;
    }
    case ModelKind::lasso: {
      result.lasso_lambda = choose_lambda(train, settings);
      LassoPredictor p;
      p.inputs = baseline_pipeline(train, settings);
      p.model = fit_lasso(flat_rows(p.inputs, train), targets_of(train), result.lasso_lambda);
      result.model = std::move(p);
      break;
    }
    case ModelKind::rf: {
      ForestPredictor p;
      p.inputs = baseline_pipeline(train, settings);
      ForestConfig config = settings.forest;
      config.seed = settings.seed;
      p.model = fit_random_forest(flat_rows(p.inputs, train), targets_of(train), config);
      result.model = std::move(p);
      break;
    }
    case ModelKind::average:
      result.model = AveragePredictor{average_baseline(targets_of(train))};
      break;
  }
  return result;
}

std::vector<double> predict(const TrainedModel& model, std::span<const SequenceSample> samples) {
  if (samples.empty()) return {};
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        std::vector<double> out;
        if constexpr (std::is_same_v<T, CnnRnnModel>) {
          out = cnn_rnn_predict(m, m.inputs.prepare(samples));
        } else if constexpr (std::is_same_v<T, DfnnModel>) {
          out = dfnn_predict(m, flat_rows(m.inputs, samples));
        } else if constexpr (std::is_same_v<T, AveragePredictor>) {
          out.assign(samples.size(), m.model.predict());
        } else {
          for (const auto& s : samples) out.push_back(m.model.predict(m.inputs.prepare_flat(s)));
        }
        return out;
      },
      model);
}

}  // namespace yieldnet
