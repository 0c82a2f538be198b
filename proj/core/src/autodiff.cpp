#include "yieldnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "yieldnet/error.hpp"

namespace yieldnet::ad {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  require(!shape.empty(), "tensor shape must have at least one axis");
  for (std::size_t extent : shape) require(extent > 0, "tensor extents must be positive");
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  values_.assign(element_count(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  check_shape(shape_);
  require(values_.size() == element_count(shape_),
          "tensor value count " + std::to_string(values_.size()) + " does not match shape " +
              shape_string(shape_));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

const Shape& Var::shape() const { return tape_->shape_of(id_); }
std::size_t Var::size() const { return tape_->value_of(id_).size(); }
std::span<const double> Var::value() const { return tape_->value_of(id_); }

double Var::item() const {
  require(size() == 1, "item() requires a single-element value");
  return value()[0];
}

Var Tape::input(Tensor tensor) {
  Node node;
  node.shape = tensor.shape();
  node.value.assign(tensor.values().begin(), tensor.values().end());
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::input(Shape shape, std::span<const double> values) {
  check_shape(shape);
  require(values.size() == element_count(shape), "input value count does not match shape");
  Node node;
  node.shape = std::move(shape);
  node.value.assign(values.begin(), values.end());
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Shape shape, std::vector<double> value, BackwardFn backward) {
  Node node;
  node.shape = std::move(shape);
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_of(std::size_t id) {
  Node& node = nodes_[id];
  node.touched = true;
  return node.grad;
}

void Tape::backward(Var output, std::span<const double> seed) {
  require(owns(output), "backward seed refers to a tensor that is not on this tape");
  const std::size_t out = output.id();
  require(seed.size() == nodes_[out].value.size(),
          "seed size " + std::to_string(seed.size()) + " does not match output shape " +
              shape_string(nodes_[out].shape));

  for (std::size_t id = 0; id <= out; ++id) {
    Node& node = nodes_[id];
    node.grad.assign(node.value.size(), 0.0);
    node.touched = false;
  }
  for (std::size_t id = out + 1; id < nodes_.size(); ++id) {
    nodes_[id].grad.clear();
    nodes_[id].touched = false;
  }
  backward_extent_ = out + 1;

  std::copy(seed.begin(), seed.end(), nodes_[out].grad.begin());
  nodes_[out].touched = true;

  for (std::size_t id = out + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.touched || !node.backward) continue;
    node.backward(*this, id);
  }
}

void Tape::backward(Var output) {
  require(owns(output), "backward seed refers to a tensor that is not on this tape");
  require(output.size() == 1, "scalar backward requires a single-element output");
  const double one = 1.0;
  backward(output, std::span<const double>(&one, 1));
}

std::span<const double> Tape::grad(Var v) const {
  require(owns(v), "gradient requested for a tensor that is not on this tape");
  require(v.id() < backward_extent_, "gradient requested before backward reached this tensor");
  return nodes_[v.id()].grad;
}

Tensor Tape::grad_tensor(Var v) const {
  auto g = grad(v);
  return Tensor(nodes_[v.id()].shape, std::vector<double>(g.begin(), g.end()));
}

}  // namespace yieldnet::ad
