#include "yieldnet/model_io.hpp"

#include <bit>
#include <cstring>

#include "yieldnet/error.hpp"
#include "yieldnet/io.hpp"

namespace yieldnet {
namespace {

enum Tag : std::uint8_t { kCnnRnn = 1, kDfnn = 2, kLasso = 3, kForest = 4, kAverage = 5 };

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void reals(std::span<const double> v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void bytes(std::span<const std::uint8_t> v) {
    u64(v.size());
    for (auto x : v) u8(x);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{static_cast<std::uint8_t>(in_[pos_ + i])} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::size_t count() {
    const std::uint64_t n = u64();
    if (n > in_.size()) throw IoError("model file declares an implausible count " + std::to_string(n));
    return static_cast<std::size_t>(n);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::size_t n = count();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::vector<double> reals() {
    std::vector<double> v(count());
    for (double& x : v) x = f64();
    return v;
  }
  std::vector<std::uint8_t> bytes() {
    std::vector<std::uint8_t> v(count());
    for (auto& x : v) x = u8();
    return v;
  }
  void finish() const {
    if (pos_ != in_.size()) throw IoError("model file has " + std::to_string(in_.size() - pos_) + " trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw IoError("model file is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void put_pipeline(Writer& w, const InputPipeline& p) {
  w.u64(p.layout.management_weeks);
  w.reals(p.scaler.mean);
  w.reals(p.scaler.scale);
  w.bytes(p.keep);
}

InputPipeline get_pipeline(Reader& r) {
  InputPipeline p;
  p.layout.management_weeks = r.count();
  p.scaler.mean = r.reals();
  p.scaler.scale = r.reals();
  p.keep = r.bytes();
  return p;
}

void put_params(Writer& w, const ParameterSet& params) {
  w.u64(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.str(params.names[i]);
    const auto& shape = params.tensors[i].shape();
    w.u64(shape.size());
    for (auto e : shape) w.u64(e);
    w.reals(params.tensors[i].values());
  }
}

ParameterSet get_params(Reader& r) {
  ParameterSet params;
  const std::size_t n = r.count();
  for (std::size_t i = 0; i < n; ++i) {
    std::string name = r.str();
    ad::Shape shape(r.count());
    for (auto& e : shape) e = r.count();
    std::vector<double> values = r.reals();
    try {
      params.add(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
    } catch (const ContractViolation& e) {
      throw IoError(std::string("model file holds an invalid tensor: ") + e.what());
    }
  }
  return params;
}

void put_convs(Writer& w, const std::vector<ConvLayerSpec>& convs) {
  w.u64(convs.size());
  for (const auto& c : convs) {
    w.u64(c.out_channels);
    w.u64(c.kernel);
    w.u8(c.pool ? 1 : 0);
  }
}

std::vector<ConvLayerSpec> get_convs(Reader& r) {
  std::vector<ConvLayerSpec> convs(r.count());
  for (auto& c : convs) {
    c.out_channels = r.count();
    c.kernel = r.count();
    c.pool = r.u8() != 0;
  }
  return convs;
}

void put_target(Writer& w, const TargetScale& t) {
  w.f64(t.offset);
  w.f64(t.scale);
}

TargetScale get_target(Reader& r) {
  TargetScale t;
  t.offset = r.f64();
  t.scale = r.f64();
  return t;
}

void put(Writer& w, const CnnRnnModel& m) {
  const CnnRnnConfig& c = m.config;
  w.u8(static_cast<std::uint8_t>(c.crop));
  w.u64(c.window_years);
  w.u64(c.lstm_hidden);
  w.u64(c.fc_weather_out);
  w.u64(c.fc_soil_out);
  w.u64(c.management_weeks);
  put_convs(w, c.weather_convs);
  put_convs(w, c.soil_convs);
  w.u8(c.all_step_loss ? 1 : 0);
  put_pipeline(w, m.inputs);
  put_target(w, m.target);
  put_params(w, m.params);
}

CnnRnnModel get_cnn_rnn(Reader& r) {
  CnnRnnModel m;
  CnnRnnConfig& c = m.config;
  const std::uint8_t crop = r.u8();
  if (crop > 1) throw IoError("model file names an unknown crop");
  c.crop = static_cast<Crop>(crop);
  c.window_years = r.count();
  c.lstm_hidden = r.count();
  c.fc_weather_out = r.count();
  c.fc_soil_out = r.count();
  c.management_weeks = r.count();
  c.weather_convs = get_convs(r);
  c.soil_convs = get_convs(r);
  c.all_step_loss = r.u8() != 0;
  m.inputs = get_pipeline(r);
  m.target = get_target(r);
  m.params = get_params(r);
  return m;
}

void put(Writer& w, const DfnnModel& m) {
  const DfnnConfig& c = m.config;
  w.u64(c.input_dim);
  w.u64(c.hidden_layers);
  w.u64(c.width);
  w.f64(c.bn_momentum);
  w.f64(c.bn_eps);
  put_pipeline(w, m.inputs);
  put_target(w, m.target);
  put_params(w, m.params);
  w.u64(m.running_mean.size());
  for (const auto& v : m.running_mean) w.reals(v);
  w.u64(m.running_var.size());
  for (const auto& v : m.running_var) w.reals(v);
}

DfnnModel get_dfnn(Reader& r) {
  DfnnModel m;
  DfnnConfig& c = m.config;
  c.input_dim = r.count();
  c.hidden_layers = r.count();
  c.width = r.count();
  c.bn_momentum = r.f64();
  c.bn_eps = r.f64();
  m.inputs = get_pipeline(r);
  m.target = get_target(r);
  m.params = get_params(r);
  m.running_mean.resize(r.count());
  for (auto& v : m.running_mean) v = r.reals();
  m.running_var.resize(r.count());
  for (auto& v : m.running_var) v = r.reals();
  return m;
}

void put(Writer& w, const LassoPredictor& p) {
  put_pipeline(w, p.inputs);
  w.reals(p.model.coefficients);
  w.f64(p.model.intercept);
  w.f64(p.model.lambda);
  w.u64(p.model.excluded.size());
  for (auto j : p.model.excluded) w.u64(j);
  w.u64(p.model.sweeps);
  w.u8(p.model.converged ? 1 : 0);
}

LassoPredictor get_lasso(Reader& r) {
  LassoPredictor p;
  p.inputs = get_pipeline(r);
  p.model.coefficients = r.reals();
  p.model.intercept = r.f64();
  p.model.lambda = r.f64();
  p.model.excluded.resize(r.count());
  for (auto& j : p.model.excluded) j = r.count();
  p.model.sweeps = static_cast<std::size_t>(r.u64());
  p.model.converged = r.u8() != 0;
  return p;
}

void put(Writer& w, const ForestPredictor& p) {
  put_pipeline(w, p.inputs);
  w.u64(p.model.trees.size());
  for (const auto& tree : p.model.trees) {
    w.u64(tree.nodes.size());
    for (const auto& n : tree.nodes) {
      w.u64(n.feature);
      w.f64(n.threshold);
      w.u64(n.left);
      w.u64(n.right);
      w.f64(n.value);
      w.u64(n.depth);
    }
  }
}

ForestPredictor get_forest(Reader& r) {
  ForestPredictor p;
  p.inputs = get_pipeline(r);
  p.model.trees.resize(r.count());
  for (auto& tree : p.model.trees) {
    tree.nodes.resize(r.count());
    for (auto& n : tree.nodes) {
      n.feature = static_cast<std::size_t>(r.u64());
      n.threshold = r.f64();
      n.left = static_cast<std::size_t>(r.u64());
      n.right = static_cast<std::size_t>(r.u64());
      n.value = r.f64();
      n.depth = static_cast<std::size_t>(r.u64());
      if (!n.is_leaf() && (n.left >= tree.nodes.size() || n.right >= tree.nodes.size())) {
        throw IoError("model file holds a tree with an out-of-range child index");
      }
    }
  }
  return p;
}

void put(Writer& w, const AveragePredictor& p) { w.f64(p.model.mean); }

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  Writer w;
  for (char c : kModelMagic) w.u8(static_cast<std::uint8_t>(c));
  constexpr std::uint8_t tags[] = {kCnnRnn, kDfnn, kLasso, kForest, kAverage};
  w.u8(tags[model.index()]);
  std::visit([&](const auto& m) { put(w, m); }, model);
  return w.take();
}

TrainedModel deserialize_model(std::string_view bytes) {
  if (bytes.substr(0, kModelMagic.size()) != kModelMagic) throw IoError("not a YNET1 model file (bad magic)");
  Reader r(bytes.substr(kModelMagic.size()));
  TrainedModel model;
  switch (r.u8()) {
    case kCnnRnn: model = get_cnn_rnn(r); break;
    case kDfnn: model = get_dfnn(r); break;
    case kLasso: model = get_lasso(r); break;
    case kForest: model = get_forest(r); break;
    case kAverage: model = AveragePredictor{{r.f64()}}; break;
    default: throw IoError("model file has an unknown type tag");
  }
  r.finish();
  return model;
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_file_atomic(path, serialize_model(model));
}

TrainedModel load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace yieldnet
