#include "evident/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/digamma.hpp>

#include "evident/errors.hpp"

namespace evident::ops {
namespace {

void same_tape(Var a, Var b, const char* what) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw DimensionError(std::string(what) + ": operands on different tapes");
  }
}

// Elementwise unary op. `df(x, y)` returns dy/dx given input x and output y.
template <class F, class DF>
Var unary(Var a, F f, DF df) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia, df](Tape& t, std::size_t self) {
    const Matrix& xv = t.value(ia);
    const Matrix& yv = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += g[i] * df(xv[i], yv[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad_mut(ia) += t.grad(self);
    if (t.needs_grad(ib)) t.grad_mut(ib) += t.grad(self);
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad_mut(ia) += t.grad(self);
    if (t.needs_grad(ib)) t.grad_mut(ib) -= t.grad(self);
  });
}

Var mul(Var a, Var b) {
  same_tape(a, b, "mul");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(hadamard(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_mut(ia) += hadamard(g, t.value(ib));
    if (t.needs_grad(ib)) t.grad_mut(ib) += hadamard(g, t.value(ia));
  });
}

Var div(Var a, Var b) {
  same_tape(a, b, "div");
  require_same_shape(a.value(), b.value(), "div");
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] /= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(y), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    if (t.needs_grad(ia)) {
      Matrix& ga = t.grad_mut(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
    }
    if (t.needs_grad(ib)) {
      Matrix& gb = t.grad_mut(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

Var scale(Var a, double s) {
  const std::size_t ia = a.id;
  return a.tape->record(a.value() * s, {a}, [ia, s](Tape& t, std::size_t self) {
    t.grad_mut(ia) += t.grad(self) * s;
  });
}

Var add_scalar(Var a, double s) {
  Matrix y = a.value();
  for (double& v : y.data()) v += s;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    t.grad_mut(ia) += t.grad(self);
  });
}

Var add_row(Var a, Var row) {
  same_tape(a, row, "add_row");
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: " + av.shape_string() + " + " + rv.shape_string());
  }
  Matrix y = av;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += rv[c];
  const std::size_t ia = a.id, ir = row.id;
  return a.tape->record(std::move(y), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_mut(ia) += g;
    if (t.needs_grad(ir)) {
      Matrix& gr = t.grad_mut(ir);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
    }
  });
}

Var sub_row(Var a, Var row) { return add_row(a, scale(row, -1.0)); }

Var scale_by(Var a, Var s) {
  same_tape(a, s, "scale_by");
  const double sv = s.value().item();
  const std::size_t ia = a.id, is = s.id;
  return a.tape->record(a.value() * sv, {a, s}, [ia, is](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad_mut(ia) += g * t.value(is).item();
    if (t.needs_grad(is)) {
      const Matrix& av = t.value(ia);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad_mut(is)[0] += acc;
    }
  });
}

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(evident::matmul(a.value(), b.value()), {a, b},
                        [ia, ib](Tape& t, std::size_t self) {
                          const Matrix& g = t.grad(self);
                          if (t.needs_grad(ia)) t.grad_mut(ia) += matmul_nt(g, t.value(ib));
                          if (t.needs_grad(ib)) t.grad_mut(ib) += matmul_tn(t.value(ia), g);
                        });
}

Var transpose(Var a) {
  const std::size_t ia = a.id;
  return a.tape->record(a.value().transposed(), {a}, [ia](Tape& t, std::size_t self) {
    t.grad_mut(ia) += t.grad(self).transposed();
  });
}

Var softplus(Var a) {
  return unary(
      a,
      [](double x) { return x > 20.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var gelu(Var a) {
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + x * pdf;
      });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var powi(Var a, int k) {
  if (k < 1) throw ConfigError("powi: exponent must be >= 1");
  return unary(
      a, [k](double x) { return std::pow(x, k); },
      [k](double x, double) { return k * std::pow(x, k - 1); });
}

Var lgamma(Var a) {
  return unary(
      a, [](double x) { return std::lgamma(x); },
      [](double x, double) { return boost::math::digamma(x); });
}

Var sum(Var a) {
  const std::size_t ia = a.id;
  return a.tape->record(Matrix::scalar(a.value().sum()), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad_mut(ia).data()) v += g;
  });
}

Var l2_norm(Var a) {
  const double n = std::sqrt(a.value().squared_norm());
  const std::size_t ia = a.id;
  return a.tape->record(Matrix::scalar(n), {a}, [ia](Tape& t, std::size_t self) {
    const double norm = t.value(self)[0];
    if (norm == 0.0) return;
    const double g = t.grad(self)[0] / norm;
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g * x[i];
  });
}

Var clamp_min(Var a, double lo) {
  return unary(
      a, [lo](double x) { return std::max(x, lo); },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mean_rows(Var a) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw DimensionError("mean_rows: no rows");
  Matrix y(1, x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) y[c] += x(r, c);
  const double inv = 1.0 / static_cast<double>(x.rows());
  y *= inv;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia, inv](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t r = 0; r < ga.rows(); ++r)
      for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g[c] * inv;
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    const double m = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (std::size_t c = 0; c < xr.size(); ++c) s += (yr[c] = std::exp(xr[c] - m));
    for (double& v : yr) v /= s;
  }
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& yv = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t r = 0; r < yv.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < yv.cols(); ++c) dot += g(r, c) * yv(r, c);
      for (std::size_t c = 0; c < yv.cols(); ++c) ga(r, c) += yv(r, c) * (g(r, c) - dot);
    }
  });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  same_tape(x, gain, "layer_norm_rows");
  same_tape(x, bias, "layer_norm_rows");
  const Matrix& xv = x.value();
  const std::size_t rows = xv.rows(), cols = xv.cols();
  if (gain.rows() != 1 || gain.cols() != cols || !gain.value().same_shape(bias.value())) {
    throw DimensionError("layer_norm_rows: gain/bias must be 1x" + std::to_string(cols));
  }
  Matrix xhat(rows, cols);
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (double v : xv.row(r)) mu += v;
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : xv.row(r)) var += (v - mu) * (v - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) xhat(r, c) = (xv(r, c) - mu) * inv_std[r];
  }
  Matrix y(rows, cols);
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y(r, c) = xhat(r, c) * gv[c] + bv[c];

  const std::size_t ix = x.id, ig = gain.id, ib = bias.id;
  return x.tape->record(
      std::move(y), {x, gain, bias},
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& gv = t.value(ig);
        const std::size_t rows = g.rows(), cols = g.cols();
        if (t.needs_grad(ig) || t.needs_grad(ib)) {
          Matrix& gg = t.grad_mut(ig);
          Matrix& gb = t.grad_mut(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
              gg[c] += g(r, c) * xhat(r, c);
              gb[c] += g(r, c);
            }
        }
        if (!t.needs_grad(ix)) return;
        Matrix& gx = t.grad_mut(ix);
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g(r, c) * gv[c];
            sum_d += d;
            sum_dx += d * xhat(r, c);
          }
          for (std::size_t c = 0; c < cols; ++c) {
            const double d = g(r, c) * gv[c];
            gx(r, c) += inv_std[r] / n * (n * d - sum_d - xhat(r, c) * sum_dx);
          }
        }
      });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows) throw DimensionError("concat_cols: row count mismatch");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) y(r, off + c) = v(r, c);
    ids.push_back(p.id);
    offsets.push_back(off);
    off += v.cols();
  }
  return parts[0].tape->record(std::move(y), parts, [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.needs_grad(ids[k])) continue;
      Matrix& gp = t.grad_mut(ids[k]);
      for (std::size_t r = 0; r < gp.rows(); ++r)
        for (std::size_t c = 0; c < gp.cols(); ++c) gp(r, c) += g(r, offsets[k] + c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat_rows");
    if (p.cols() != cols) throw DimensionError("concat_rows: column count mismatch");
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
    ids.push_back(p.id);
    offsets.push_back(off);
    off += p.rows();
  }
  return parts[0].tape->record(
      Matrix(rows, cols, std::move(data)), parts, [ids, offsets](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!t.needs_grad(ids[k])) continue;
          Matrix& gp = t.grad_mut(ids[k]);
          const double* src = g.data().data() + offsets[k] * g.cols();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
        }
      });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const Matrix& x = a.value();
  if (start + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of " + x.shape_string());
  }
  const auto src = x.data().subspan(start * x.cols(), count * x.cols());
  Matrix y(count, x.cols(), std::vector<double>(src.begin(), src.end()));
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia, start](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ia);
    double* dst = ga.data().data() + start * ga.cols();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  const Matrix& x = a.value();
  if (start + count > x.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") out of " + x.shape_string());
  }
  Matrix y(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) y(r, c) = x(r, start + c);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia, start](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, start + c) += g(r, c);
  });
}

Var pad_rows(Var a, std::size_t rows) {
  const Matrix& x = a.value();
  if (rows < x.rows()) throw DimensionError("pad_rows: target shorter than input");
  if (rows == x.rows()) return a;
  Matrix y(rows, x.cols());
  std::copy(x.data().begin(), x.data().end(), y.data().begin());
  const std::size_t ia = a.id;
  return a.tape->record(std::move(y), {a}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var depthwise_conv_rows(Var x, Var kernel, Var bias) {
  same_tape(x, kernel, "depthwise_conv_rows");
  same_tape(x, bias, "depthwise_conv_rows");
  const Matrix& xv = x.value();
  const Matrix& kv = kernel.value();
  const std::size_t T = xv.rows(), C = xv.cols(), K = kv.rows();
  if (K % 2 == 0) throw ConfigError("depthwise_conv_rows: kernel size must be odd");
  if (kv.cols() != C || bias.rows() != 1 || bias.cols() != C) {
    throw DimensionError("depthwise_conv_rows: kernel " + kv.shape_string() + ", bias " +
                         bias.value().shape_string() + " for input " + xv.shape_string());
  }
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(K / 2);
  Matrix y(T, C);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) y(t, c) = bias.value()[c];
    for (std::size_t j = 0; j < K; ++j) {
      const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t + j) - half;
      if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) continue;
      for (std::size_t c = 0; c < C; ++c) y(t, c) += kv(j, c) * xv(static_cast<std::size_t>(s), c);
    }
  }
  const std::size_t ix = x.id, ik = kernel.id, ib = bias.id;
  return x.tape->record(std::move(y), {x, kernel, bias}, [ix, ik, ib, half](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& xv = t.value(ix);
    const Matrix& kv = t.value(ik);
    const std::size_t T = g.rows(), C = g.cols(), K = kv.rows();
    const bool gx_on = t.needs_grad(ix), gk_on = t.needs_grad(ik);
    if (t.needs_grad(ib)) {
      Matrix& gb = t.grad_mut(ib);
      for (std::size_t r = 0; r < T; ++r)
        for (std::size_t c = 0; c < C; ++c) gb[c] += g(r, c);
    }
    for (std::size_t r = 0; r < T; ++r) {
      for (std::size_t j = 0; j < K; ++j) {
        const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(r + j) - half;
        if (s < 0 || s >= static_cast<std::ptrdiff_t>(T)) continue;
        const auto su = static_cast<std::size_t>(s);
        for (std::size_t c = 0; c < C; ++c) {
          if (gx_on) t.grad_mut(ix)(su, c) += g(r, c) * kv(j, c);
          if (gk_on) t.grad_mut(ik)(j, c) += g(r, c) * xv(su, c);
        }
      }
    }
  });
}

}  // namespace evident::ops
