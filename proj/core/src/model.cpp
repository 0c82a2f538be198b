#include "yieldnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "yieldnet/error.hpp"
#include "yieldnet/rng.hpp"

namespace yieldnet {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

// Length after a conv stack; convolutions preserve length, pools halve it.
std::size_t stack_length(const std::vector<ConvLayerSpec>& stack, std::size_t length) {
  for (const auto& layer : stack) {
    if (layer.pool) {
      require(length >= 2, "conv stack pools a sequence shorter than 2");
      length /= 2;
    }
  }
  return length;
}

void validate_stack(const std::vector<ConvLayerSpec>& stack, std::size_t length, const char* branch) {
  require(!stack.empty(), std::string(branch) + " conv stack is empty");
  for (const auto& layer : stack) {
    require(layer.out_channels > 0, std::string(branch) + " conv channels must be positive");
    require(layer.kernel % 2 == 1, std::string(branch) + " conv kernel must be odd");
  }
  require(stack_length(stack, length) > 0, std::string(branch) + " conv stack reduces length to zero");
}

void fill_xavier(std::span<double> out, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = xavier_bound(fan_in, fan_out);
  for (double& w : out) w = rng.uniform(-bound, bound);
}

}  // namespace

CnnRnnConfig CnnRnnConfig::for_crop(Crop crop) {
  CnnRnnConfig config;
  config.crop = crop;
  config.fc_weather_out = crop == Crop::corn ? 60 : 40;
  return config;
}

void CnnRnnConfig::validate() const {
  require(window_years >= 1, "window length k must be at least 1");
  require(lstm_hidden > 0 && fc_weather_out > 0 && fc_soil_out > 0 && management_weeks > 0,
          "network dimensions must be positive");
  validate_stack(weather_convs, kWeeks, "weather");
  validate_stack(soil_convs, kSoilDepths, "soil");
}

std::size_t CnnRnnConfig::lstm_input_dim() const {
  return fc_weather_out + fc_soil_out + kSoilSurface + 1 + management_weeks;
}

std::size_t CnnRnnConfig::weather_flat_dim() const {
  return weather_convs.back().out_channels * stack_length(weather_convs, kWeeks);
}

std::size_t CnnRnnConfig::soil_flat_dim() const {
  return soil_convs.back().out_channels * stack_length(soil_convs, kSoilDepths);
}

std::size_t ParameterSet::add(std::string name, Tensor tensor) {
  names.push_back(std::move(name));
  tensors.push_back(std::move(tensor));
  return tensors.size() - 1;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw ContractViolation("no parameter named '" + std::string(name) + "'");
}

std::vector<Var> ParameterSet::bind(ad::Tape& tape) const {
  std::vector<Var> vars;
  vars.reserve(tensors.size());
  for (const auto& t : tensors) vars.push_back(tape.input(t.shape(), t.values()));
  return vars;
}

CnnRnnParamIndex cnn_rnn_param_index(const CnnRnnConfig& config) {
  CnnRnnParamIndex index;
  std::size_t next = 0;
  for (std::size_t i = 0; i < config.weather_convs.size(); ++i, next += 2) index.weather_convs.push_back(next);
  index.weather_fc = next;
  next += 2;
  for (std::size_t i = 0; i < config.soil_convs.size(); ++i, next += 2) index.soil_convs.push_back(next);
  index.soil_fc = next;
  next += 2;
  index.lstm = next;
  next += 2;
  index.head = next;
  return index;
}

double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  require(fan_in > 0 && fan_out > 0, "xavier fans must be positive");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::vector<double> xavier_init(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(fan_in * fan_out);
  fill_xavier(out, fan_in, fan_out, rng);
  return out;
}

CnnRnnModel build_cnn_rnn(const CnnRnnConfig& config, std::uint64_t seed) {
  config.validate();
  CnnRnnModel model;
  model.config = config;
  model.inputs.layout = config.layout();

  auto add_weight = [&](std::string name, Shape shape, std::size_t fan_in, std::size_t fan_out) {
    Tensor t(std::move(shape));
    Rng rng(mix_seed(seed, model.params.size()));
    fill_xavier(t.values(), fan_in, fan_out, rng);
    model.params.add(std::move(name), std::move(t));
  };
  auto add_bias = [&](std::string name, std::size_t n) { model.params.add(std::move(name), Tensor({n})); };

  auto add_stack = [&](const std::string& prefix, const std::vector<ConvLayerSpec>& stack, std::size_t channels) {
    for (std::size_t i = 0; i < stack.size(); ++i) {
      const auto& layer = stack[i];
      const std::string base = prefix + ".conv" + std::to_string(i + 1);
      add_weight(base + ".kernel", {layer.out_channels, channels, layer.kernel}, channels * layer.kernel,
                 layer.out_channels * layer.kernel);
      add_bias(base + ".bias", layer.out_channels);
      channels = layer.out_channels;
    }
  };

  add_stack("wcnn", config.weather_convs, kWeatherVars);
  add_weight("wcnn.fc.weight", {config.fc_weather_out, config.weather_flat_dim()}, config.weather_flat_dim(),
             config.fc_weather_out);
  add_bias("wcnn.fc.bias", config.fc_weather_out);

  add_stack("scnn", config.soil_convs, kSoilVars);
  add_weight("scnn.fc.weight", {config.fc_soil_out, config.soil_flat_dim()}, config.soil_flat_dim(),
             config.fc_soil_out);
  add_bias("scnn.fc.bias", config.fc_soil_out);

  const std::size_t h = config.lstm_hidden;
  const std::size_t lstm_cols = config.lstm_input_dim() + h;
  add_weight("lstm.weight", {4 * h, lstm_cols}, lstm_cols, 4 * h);
  add_bias("lstm.bias", 4 * h);

  add_weight("head.weight", {1, h}, h, 1);
  add_bias("head.bias", 1);
  return model;
}

namespace {

Var conv_stack(const std::vector<ConvLayerSpec>& stack, const std::vector<std::size_t>& index,
               std::span<const Var> params, Var x) {
  for (std::size_t i = 0; i < stack.size(); ++i) {
    x = ad::relu(ad::conv1d(x, params[index[i]], params[index[i] + 1]));
    if (stack[i].pool) x = ad::avgpool1d(x);
  }
  return x;
}

Var flatten_series(Var x) {
  const Shape& s = x.shape();
  if (s.size() == 3) return ad::reshape(x, {s[0], s[1] * s[2]});
  return ad::reshape(x, {s[0] * s[1]});
}

}  // namespace

Var wcnn_forward(const CnnRnnModel& model, std::span<const Var> params, Var weather) {
  const Shape& s = weather.shape();
  require((s.size() == 2 && s[0] == kWeatherVars && s[1] == kWeeks) ||
              (s.size() == 3 && s[1] == kWeatherVars && s[2] == kWeeks),
          "weather input must be [6, 52] or [B, 6, 52], got " + ad::shape_string(s));
  const auto index = cnn_rnn_param_index(model.config);
  Var x = flatten_series(conv_stack(model.config.weather_convs, index.weather_convs, params, weather));
  return ad::relu(ad::affine(x, params[index.weather_fc], params[index.weather_fc + 1]));
}

Var scnn_forward(const CnnRnnModel& model, std::span<const Var> params, Var soil) {
  const Shape& s = soil.shape();
  require((s.size() == 2 && s[0] == kSoilVars && s[1] == kSoilDepths) ||
              (s.size() == 3 && s[1] == kSoilVars && s[2] == kSoilDepths),
          "soil profile must be [10, 9] or [B, 10, 9], got " + ad::shape_string(s));
  const auto index = cnn_rnn_param_index(model.config);
  Var x = flatten_series(conv_stack(model.config.soil_convs, index.soil_convs, params, soil));
  return ad::relu(ad::affine(x, params[index.soil_fc], params[index.soil_fc + 1]));
}

std::vector<double> wcnn_forward(const CnnRnnModel& model, const Tensor& weather) {
  ad::Tape tape;
  auto params = model.params.bind(tape);
  Var out = wcnn_forward(model, params, tape.input(weather));
  return {out.value().begin(), out.value().end()};
}

std::vector<double> scnn_forward(const CnnRnnModel& model, const Tensor& soil_profile) {
  ad::Tape tape;
  auto params = model.params.bind(tape);
  Var out = scnn_forward(model, params, tape.input(soil_profile));
  return {out.value().begin(), out.value().end()};
}

CnnRnnGraph cnn_rnn_graph(ad::Tape& tape, const CnnRnnModel& model, std::span<const ModelInput* const> batch) {
  const CnnRnnConfig& config = model.config;
  const FeatureLayout layout = config.layout();
  const std::size_t width = layout.size();
  const std::size_t steps = config.steps();
  require(!batch.empty(), "cnn_rnn_graph needs at least one sample");
  for (const ModelInput* input : batch) {
    require(input->steps == steps, "sample window has " + std::to_string(input->steps) +
                                       " steps; the model unrolls " + std::to_string(steps));
    require(input->width == width, "sample feature width does not match the model layout");
  }
  const std::size_t b = batch.size();
  const std::size_t h = config.lstm_hidden;
  const auto index = cnn_rnn_param_index(config);

  CnnRnnGraph graph;
  graph.params = model.params.bind(tape);
  const ad::LstmParams lstm{graph.params[index.lstm], graph.params[index.lstm + 1]};

  Var hidden = tape.input(Tensor({b, h}));
  Var cell = tape.input(Tensor({b, h}));
  std::vector<double> rows(b * width);
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < b; ++i) {
      auto src = batch[i]->step(s);
      std::copy(src.begin(), src.end(), rows.begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    Var x = tape.input({b, width}, rows);
    graph.step_inputs.push_back(x);

    Var weather = ad::reshape(ad::slice(x, FeatureLayout::weather_offset(), FeatureLayout::weather_size),
                              {b, kWeatherVars, kWeeks});
    Var soil = ad::reshape(ad::slice(x, FeatureLayout::soil_offset(), FeatureLayout::soil_size),
                           {b, kSoilVars, kSoilDepths});
    Var surface = ad::slice(x, FeatureLayout::surface_offset(), FeatureLayout::surface_size);
    Var management = ad::slice(x, FeatureLayout::management_offset(), layout.management_weeks);
    Var avg_yield = ad::slice(x, layout.avg_yield_index(), 1);

    Var lstm_in = ad::concat({wcnn_forward(model, graph.params, weather), scnn_forward(model, graph.params, soil),
                              surface, avg_yield, management});
    auto state = ad::lstm_cell_step(lstm_in, hidden, cell, lstm);
    hidden = state.h;
    cell = state.c;
    graph.hidden.push_back(hidden);

    Var head = ad::affine(hidden, graph.params[index.head], graph.params[index.head + 1]);
    graph.predictions.push_back(
        ad::scale_shift(ad::reshape(head, {b}), model.target.scale, model.target.offset));
  }
  return graph;
}

std::vector<double> cnn_rnn_forward(const CnnRnnModel& model, const ModelInput& input) {
  ad::Tape tape;
  const ModelInput* one[] = {&input};
  auto graph = cnn_rnn_graph(tape, model, one);
  std::vector<double> out;
  for (const Var& p : graph.predictions) out.push_back(p.item());
  return out;
}

std::vector<double> cnn_rnn_forward(const CnnRnnModel& model, const SequenceSample& sample) {
  require(sample.window.size() == model.config.steps(), "sample window is incomplete for this model");
  return cnn_rnn_forward(model, model.inputs.prepare(sample));
}

std::vector<double> cnn_rnn_predict(const CnnRnnModel& model, std::span<const ModelInput> inputs) {
  constexpr std::size_t kChunk = 64;
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t begin = 0; begin < inputs.size(); begin += kChunk) {
    const std::size_t end = std::min(inputs.size(), begin + kChunk);
    std::vector<const ModelInput*> batch;
    for (std::size_t i = begin; i < end; ++i) batch.push_back(&inputs[i]);
    ad::Tape tape;
    auto graph = cnn_rnn_graph(tape, model, batch);
    auto final = graph.predictions.back().value();
    out.insert(out.end(), final.begin(), final.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

void DfnnConfig::validate() const {
  require(input_dim > 0 && width > 0, "DFNN dimensions must be positive");
  require(hidden_layers % 2 == 1, "DFNN hidden layer count must be odd (input layer plus residual pairs)");
  require(bn_eps > 0.0 && bn_momentum >= 0.0 && bn_momentum < 1.0, "invalid batch-norm settings");
}

DfnnModel build_dfnn(const DfnnConfig& config, std::uint64_t seed) {
  config.validate();
  DfnnModel model;
  model.config = config;
  std::size_t in = config.input_dim;
  for (std::size_t l = 0; l < config.hidden_layers; ++l) {
    const std::string base = "dfnn.layer" + std::to_string(l + 1);
    Tensor w({config.width, in});
    Rng rng(mix_seed(seed, model.params.size()));
    fill_xavier(w.values(), in, config.width, rng);
    model.params.add(base + ".weight", std::move(w));
    model.params.add(base + ".bias", Tensor({config.width}));
    model.params.add(base + ".bn_scale", Tensor({config.width}, std::vector<double>(config.width, 1.0)));
    model.params.add(base + ".bn_shift", Tensor({config.width}));
    model.running_mean.push_back(std::vector<double>(config.width, 0.0));
    model.running_var.push_back(std::vector<double>(config.width, 1.0));
    in = config.width;
  }
  Tensor head({1, config.width});
  Rng rng(mix_seed(seed, model.params.size()));
  fill_xavier(head.values(), config.width, 1, rng);
  model.params.add("dfnn.head.weight", std::move(head));
  model.params.add("dfnn.head.bias", Tensor({1}));
  return model;
}

Var dfnn_graph(const DfnnModel& model, std::span<const Var> params, Var x, bool training_mode,
               std::vector<ad::BatchNormStats>* stats) {
  const DfnnConfig& config = model.config;
  require(x.shape().size() == 2 && x.shape()[1] == config.input_dim,
          "DFNN input must be [B, " + std::to_string(config.input_dim) + "]");
  const std::size_t batch = x.shape()[0];
  if (stats != nullptr) stats->assign(config.hidden_layers, {});

  auto layer = [&](std::size_t l, Var in) {
    const std::size_t p = 4 * l;
    Var z = ad::affine(in, params[p], params[p + 1]);
    if (training_mode) {
      return ad::batch_norm_train(z, params[p + 2], params[p + 3], config.bn_eps,
                                  stats != nullptr ? &(*stats)[l] : nullptr);
    }
    return ad::batch_norm_infer(z, params[p + 2], params[p + 3], model.running_mean[l], model.running_var[l],
                                config.bn_eps);
  };

  Var a = ad::relu(layer(0, x));
  for (std::size_t l = 1; l + 1 < config.hidden_layers + 1; l += 2) {
    Var u = ad::relu(layer(l, a));
    Var v = layer(l + 1, u);
    a = ad::relu(ad::add(v, a));
  }
  const std::size_t head = 4 * config.hidden_layers;
  Var out = ad::affine(a, params[head], params[head + 1]);
  return ad::scale_shift(ad::reshape(out, {batch}), model.target.scale, model.target.offset);
}

double dfnn_forward(const DfnnModel& model, std::span<const double> features, bool training_mode) {
  require(features.size() == model.config.input_dim, "DFNN feature dimension mismatch");
  ad::Tape tape;
  auto params = model.params.bind(tape);
  Var x = tape.input({1, features.size()}, features);
  return dfnn_graph(model, params, x, training_mode).item();
}

std::vector<double> dfnn_predict(const DfnnModel& model, std::span<const std::vector<double>> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t begin = 0; begin < rows.size(); begin += kChunk) {
    const std::size_t end = std::min(rows.size(), begin + kChunk);
    std::vector<double> flat;
    for (std::size_t i = begin; i < end; ++i) {
      require(rows[i].size() == model.config.input_dim, "DFNN feature dimension mismatch");
      flat.insert(flat.end(), rows[i].begin(), rows[i].end());
    }
    ad::Tape tape;
    auto params = model.params.bind(tape);
    Var x = tape.input({end - begin, model.config.input_dim}, flat);
    auto pred = dfnn_graph(model, params, x, false).value();
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

}  // namespace yieldnet
