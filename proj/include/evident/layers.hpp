#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "evident/ops.hpp"
#include "evident/tape.hpp"

namespace evident {

using Rng = std::mt19937_64;

// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix xavier_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      Rng& rng);

// y = x W + b, W is in x out.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                       Rng& rng);
  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }
  Var forward(Tape& tape, Var x) const;
};

struct LayerNorm {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNorm create(ParameterSet& ps, const std::string& name, std::size_t dim);
  Var forward(Tape& tape, Var x) const;
};

// Two-layer perceptron with a GELU between the layers.
struct Mlp {
  Linear first;
  Linear second;

  static Mlp create(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                    std::size_t out, Rng& rng);
  Var forward(Tape& tape, Var x) const;
};

// Per-channel temporal convolution (same padding) followed by pointwise channel mixing.
struct Conv1d {
  Parameter* kernel = nullptr;  // K x D
  Parameter* bias = nullptr;    // 1 x D
  Linear pointwise;

  static Conv1d create(ParameterSet& ps, const std::string& name, std::size_t dim,
                       std::size_t kernel_size, Rng& rng);
  std::size_t kernel_size() const { return kernel->value.rows(); }
  Var forward(Tape& tape, Var x) const;
};

// Single-head scaled dot-product self-attention: softmax(Q K^T / sqrt(D)) V.
struct Attention {
  Linear query;
  Linear key;
  Linear value;

  static Attention create(ParameterSet& ps, const std::string& name, std::size_t dim, Rng& rng);
  // Row-stochastic T x T attention matrix.
  Var weights(Tape& tape, Var x) const;
  Var forward(Tape& tape, Var x) const;
};

}  // namespace evident
