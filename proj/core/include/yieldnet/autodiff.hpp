#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace yieldnet::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Every extent is positive.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

enum class GradMode {
  standard,
  /// ReLU backward additionally drops negative upstream gradients.
  guided,
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Shape& shape() const;
  std::size_t size() const;
  std::span<const double> value() const;
  double item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records the forward computation as an ordered list of nodes. Node ids grow
/// with creation order and every node's inputs have smaller ids, so walking
/// ids downward is a reverse topological traversal.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(GradMode mode = GradMode::standard) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  GradMode mode() const { return mode_; }
  std::size_t node_count() const { return nodes_.size(); }

  Var input(Tensor tensor);
  Var input(Shape shape, std::span<const double> values);

  /// Appends an operation result. `backward` reads the node's gradient and
  /// accumulates into its inputs' gradients via grad_of().
  Var record(Shape shape, std::vector<double> value, BackwardFn backward);

  /// Seeds `output` with `seed` and propagates to every earlier node.
  void backward(Var output, std::span<const double> seed);
  /// Scalar output seeded with 1.
  void backward(Var output);

  std::span<const double> grad(Var v) const;
  Tensor grad_tensor(Var v) const;

  // Accessors for operation implementations.
  const Shape& shape_of(std::size_t id) const { return nodes_[id].shape; }
  std::span<const double> value_of(std::size_t id) const { return nodes_[id].value; }
  std::span<const double> upstream(std::size_t id) const { return nodes_[id].grad; }
  std::span<double> grad_of(std::size_t id);

  bool owns(Var v) const { return v.tape_ == this && v.id_ < nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    BackwardFn backward;
    bool touched = false;
  };

  std::vector<Node> nodes_;
  GradMode mode_;
  std::size_t backward_extent_ = 0;
};

}  // namespace yieldnet::ad
