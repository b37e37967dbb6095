#include "evident/layers.hpp"

#include <cmath>

#include "evident/errors.hpp"

namespace evident {

Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

Linear Linear::create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                      Rng& rng) {
  if (in == 0 || out == 0) throw ConfigError("Linear " + name + ": zero dimension");
  Linear l;
  l.weight = &ps.add(name + ".weight", xavier_uniform(in, out, in, out, rng));
  l.bias = &ps.add(name + ".bias", Matrix(1, out));
  return l;
}

Var Linear::forward(Tape& tape, Var x) const {
  if (x.cols() != in_dim()) {
    throw DimensionError("Linear: input " + x.value().shape_string() + " vs weight " +
                         weight->value.shape_string());
  }
  return ops::add_row(ops::matmul(x, tape.param(*weight)), tape.param(*bias));
}

LayerNorm LayerNorm::create(ParameterSet& ps, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.gain = &ps.add(name + ".gain", Matrix(1, dim, 1.0));
  ln.bias = &ps.add(name + ".bias", Matrix(1, dim));
  return ln;
}

Var LayerNorm::forward(Tape& tape, Var x) const {
  return ops::layer_norm_rows(x, tape.param(*gain), tape.param(*bias));
}

Mlp Mlp::create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                std::size_t out, Rng& rng) {
  Mlp m;
  m.first = Linear::create(ps, name + ".0", in, hidden, rng);
  m.second = Linear::create(ps, name + ".1", hidden, out, rng);
  return m;
}

Var Mlp::forward(Tape& tape, Var x) const {
  return second.forward(tape, ops::gelu(first.forward(tape, x)));
}

Conv1d Conv1d::create(ParameterSet& ps, const std::string& name, std::size_t dim,
                      std::size_t kernel_size, Rng& rng) {
  if (kernel_size % 2 == 0) {
    throw ConfigError("Conv1d " + name + ": kernel size must be odd, got " +
                      std::to_string(kernel_size));
  }
  Conv1d c;
  c.kernel = &ps.add(name + ".kernel",
                     xavier_uniform(kernel_size, dim, kernel_size, kernel_size, rng));
  c.bias = &ps.add(name + ".kernel_bias", Matrix(1, dim));
  c.pointwise = Linear::create(ps, name + ".pointwise", dim, dim, rng);
  return c;
}

Var Conv1d::forward(Tape& tape, Var x) const {
  Var y = ops::depthwise_conv_rows(x, tape.param(*kernel), tape.param(*bias));
  return pointwise.forward(tape, y);
}

Attention Attention::create(ParameterSet& ps, const std::string& name, std::size_t dim, Rng& rng) {
  Attention a;
  a.query = Linear::create(ps, name + ".query", dim, dim, rng);
  a.key = Linear::create(ps, name + ".key", dim, dim, rng);
  a.value = Linear::create(ps, name + ".value", dim, dim, rng);
  return a;
}

Var Attention::weights(Tape& tape, Var x) const {
  if (x.rows() == 0) throw DimensionError("Attention: empty sequence");
  Var q = query.forward(tape, x);
  Var k = key.forward(tape, x);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(query.out_dim()));
  return ops::softmax_rows(ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_d));
}

Var Attention::forward(Tape& tape, Var x) const {
  return ops::matmul(weights(tape, x), value.forward(tape, x));
}

}  // namespace evident
