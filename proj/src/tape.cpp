#include "evident/tape.hpp"

#include <cmath>

#include "evident/errors.hpp"

namespace evident {

Parameter& ParameterSet::add(std::string name, Matrix init) {
  if (find(name) != nullptr) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back(Parameter{std::move(name), std::move(init), params_.size()});
  return params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::input(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (!track_params_) return constant(p.value);
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn backward) {
  bool req = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw DimensionError("Tape::record: parent belongs to another tape");
    req = req || nodes_[p.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, req ? std::move(backward) : BackwardFn{}, nullptr, req});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var output) {
  if (output.tape != this) throw DimensionError("Tape::backward: foreign output");
  const Matrix& out = nodes_[output.id].value;
  if (out.rows() != 1 || out.cols() != 1) {
    throw DimensionError("Tape::backward: output must be 1x1, got " + out.shape_string());
  }
  for (auto& n : nodes_) n.grad = Matrix(n.value.rows(), n.value.cols());
  nodes_[output.id].grad[0] = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, i);
  }
}

void Tape::accumulate_param_grads(GradientSet& grads) const {
  for (const auto& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    Matrix& g = grads.at(n.param->index);
    if (g.empty()) g = Matrix(n.grad.rows(), n.grad.cols());
    g += n.grad;
  }
}

GradientSet zero_gradients(const ParameterSet& params) {
  GradientSet g;
  g.reserve(params.size());
  for (const auto& p : params) g.emplace_back(p.value.rows(), p.value.cols());
  return g;
}

double global_norm(const GradientSet& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += g.squared_norm();
  return std::sqrt(s);
}

}  // namespace evident
