#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "evident/matrix.hpp"

namespace evident {

// A trainable matrix owned by a ParameterSet. `index` is its slot in gradient vectors.
struct Parameter {
  std::string name;
  Matrix value;
  std::size_t index = 0;
};

// Stable-address container of named parameters.
class ParameterSet {
 public:
  Parameter& add(std::string name, Matrix init);
  std::size_t size() const noexcept { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  // nullptr when absent.
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  std::size_t scalar_count() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
};

// One gradient matrix per parameter slot; an empty matrix means zero.
using GradientSet = std::vector<Matrix>;

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double item() const { return value().item(); }
};

// Tape-based reverse-mode engine over matrix-valued nodes. Nodes are appended
// in topological order; backward() walks them in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  // With track_params = false, parameters enter as constants (inference only).
  explicit Tape(bool track_params) : track_params_(track_params) {}

  Var constant(Matrix value);
  Var constant(double value) { return constant(Matrix::scalar(value)); }
  // Leaf whose gradient is tracked (used for inputs under test).
  Var input(Matrix value);
  Var param(Parameter& p);

  // Appends an operation node. `parents` decide whether it requires a gradient;
  // `backward` is dropped when none of them do.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn backward);

  // Reverse sweep from a 1x1 output. Every node ends with a gradient of its own shape.
  void backward(Var output);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  Matrix& grad_mut(std::size_t id) { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds parameter-leaf gradients into `grads` (sized to the parameter set).
  void accumulate_param_grads(GradientSet& grads) const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool track_params_ = true;
};

GradientSet zero_gradients(const ParameterSet& params);
double global_norm(const GradientSet& grads);

}  // namespace evident
