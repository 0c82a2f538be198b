#include "yieldnet/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "yieldnet/error.hpp"
#include "yieldnet/io.hpp"
#include "yieldnet/log.hpp"

namespace yieldnet {
namespace {

std::vector<const ModelInput*> slice_batch(std::span<const ModelInput> inputs, std::size_t begin, std::size_t end) {
  std::vector<const ModelInput*> batch;
  for (std::size_t i = begin; i < end; ++i) batch.push_back(&inputs[i]);
  return batch;
}

}  // namespace

std::vector<std::uint8_t> select_seed_neurons(const CnnRnnModel& model, std::span<const ModelInput> inputs) {
  require(!inputs.empty(), "select_seed_neurons needs at least one sample");
  const std::size_t h = model.config.lstm_hidden;
  std::vector<double> total(h, 0.0);
  constexpr std::size_t kBatch = 64;
  for (std::size_t begin = 0; begin < inputs.size(); begin += kBatch) {
    const std::size_t end = std::min(inputs.size(), begin + kBatch);
    ad::Tape tape;
    auto graph = cnn_rnn_graph(tape, model, slice_batch(inputs, begin, end));
    auto values = graph.hidden.back().value();
    for (std::size_t i = 0; i < end - begin; ++i)
      for (std::size_t j = 0; j < h; ++j) total[j] += values[i * h + j];
  }
  std::vector<std::uint8_t> seed(h);
  for (std::size_t j = 0; j < h; ++j) seed[j] = total[j] / static_cast<double>(inputs.size()) > 0.0 ? 1 : 0;
  return seed;
}

std::vector<double> normalize_by_group(std::span<const double> raw, const FeatureLayout& layout) {
  require(raw.size() == layout.size(), "importance vector does not match the feature layout");
  constexpr std::size_t kGroups = 5;
  double group_max[kGroups] = {0.0, 0.0, 0.0, 0.0, 0.0};
  for (std::size_t f = 0; f < raw.size(); ++f) {
    auto g = static_cast<std::size_t>(layout.group_of(f));
    group_max[g] = std::max(group_max[g], raw[f]);
  }
  std::vector<double> out(raw.size(), 0.0);
  for (std::size_t f = 0; f < raw.size(); ++f) {
    const double m = group_max[static_cast<std::size_t>(layout.group_of(f))];
    out[f] = m > 0.0 ? raw[f] / m : 0.0;
  }
  return out;
}

AttributionReport guided_attribute(const CnnRnnModel& model, std::span<const ModelInput> inputs,
                                   const AttributionOptions& options) {
  require(!inputs.empty(), "guided_attribute needs at least one sample");
  require(options.batch > 0, "attribution batch size must be positive");
  AttributionReport report;
  report.layout = model.config.layout();
  report.from_head = options.from_head;
  report.samples = inputs.size();
  const std::size_t width = report.layout.size();
  const std::size_t h = model.config.lstm_hidden;
  report.raw.assign(width, 0.0);

  if (options.from_head) {
    report.seed.assign(1, 1);
  } else {
    report.seed = select_seed_neurons(model, inputs);
  }
  if (std::none_of(report.seed.begin(), report.seed.end(), [](std::uint8_t s) { return s != 0; })) {
    log_warning("guided_attribute: no LSTM output neuron has a positive mean activation; report is all zeros");
    report.normalized.assign(width, 0.0);
    return report;
  }

  for (std::size_t begin = 0; begin < inputs.size(); begin += options.batch) {
    const std::size_t end = std::min(inputs.size(), begin + options.batch);
    const std::size_t b = end - begin;
    ad::Tape tape(ad::GradMode::guided);
    auto graph = cnn_rnn_graph(tape, model, slice_batch(inputs, begin, end));
    if (options.from_head) {
      tape.backward(graph.predictions.back(), std::vector<double>(b, 1.0));
    } else {
      std::vector<double> seed(b * h);
      for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < h; ++j) seed[i * h + j] = report.seed[j];
      tape.backward(graph.hidden.back(), seed);
    }
    auto g = tape.grad(graph.step_inputs.back());
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t f = 0; f < width; ++f) report.raw[f] += std::abs(g[i * width + f]);
  }
  for (double& r : report.raw) r /= static_cast<double>(inputs.size());
  report.normalized = normalize_by_group(report.raw, report.layout);
  return report;
}

AttributionReport guided_attribute(const CnnRnnModel& model, std::span<const SequenceSample> samples,
                                   const AttributionOptions& options) {
  auto inputs = model.inputs.prepare(samples);
  return guided_attribute(model, inputs, options);
}

std::vector<std::uint8_t> select_top_fraction(std::span<const double> importance, double fraction) {
  require(fraction > 0.0 && fraction <= 1.0, "fraction must lie in (0, 1]");
  const std::size_t p = importance.size();
  const auto keep = std::min(p, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(p) - 1e-9)));
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return importance[a] > importance[b]; });
  std::vector<std::uint8_t> mask(p, 0);
  for (std::size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
  return mask;
}

std::vector<std::uint8_t> select_top_fraction(const AttributionReport& report, double fraction) {
  return select_top_fraction(report.raw, fraction);
}

std::vector<std::size_t> top_features(const AttributionReport& report, FeatureGroup group, std::size_t count) {
  std::vector<std::size_t> members;
  for (std::size_t f = 0; f < report.raw.size(); ++f)
    if (report.layout.group_of(f) == group) members.push_back(f);
  std::stable_sort(members.begin(), members.end(),
                   [&](std::size_t a, std::size_t b) { return report.raw[a] > report.raw[b]; });
  if (members.size() > count) members.resize(count);
  return members;
}

std::string attribution_csv(const AttributionReport& report, std::string_view comment) {
  constexpr std::string_view header[] = {"feature_id", "group", "description", "raw_importance",
                                         "normalized_importance"};
  CsvWriter csv(header, comment);
  for (std::size_t f = 0; f < report.raw.size(); ++f) {
    csv.field(static_cast<long long>(f))
        .field(feature_group_name(report.layout.group_of(f)))
        .field(report.layout.describe(f))
        .field(report.raw[f])
        .field(report.normalized[f]);
    csv.end_row();
  }
  return csv.text();
}

}  // namespace yieldnet
