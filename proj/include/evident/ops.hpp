#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evident/tape.hpp"

// Differentiable primitives over tape nodes. All ops require their operands to
// live on the same tape and throw DimensionError on shape disagreement.
namespace evident::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// a (R x C) + row (1 x C) broadcast over rows.
Var add_row(Var a, Var row);
// a (R x C) - row (1 x C) broadcast over rows.
Var sub_row(Var a, Var row);
// a * s where s is a 1x1 node.
Var scale_by(Var a, Var s);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var softplus(Var a);
Var sigmoid(Var a);
Var gelu(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var abs(Var a);
Var square(Var a);
Var powi(Var a, int k);
Var lgamma(Var a);

Var sum(Var a);        // -> 1x1
// Euclidean norm of all entries -> 1x1. The gradient at the origin is taken as zero.
Var l2_norm(Var a);
// max(a, lo) elementwise.
Var clamp_min(Var a, double lo);
Var mean(Var a);       // -> 1x1
Var mean_rows(Var a);  // column means -> 1 x C

Var softmax_rows(Var a);
// Row-wise normalization with learned gain/bias (1 x C each).
Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
// Appends zero rows up to `rows`.
Var pad_rows(Var a, std::size_t rows);

// Same-padded per-channel temporal convolution: y[t,c] = sum_j w[j,c] x[t+j-K/2, c] + b[c].
// kernel is K x C (K odd), bias 1 x C.
Var depthwise_conv_rows(Var x, Var kernel, Var bias);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator+(Var a, double s) { return add_scalar(a, s); }
inline Var operator-(Var a, double s) { return add_scalar(a, -s); }

}  // namespace evident::ops
