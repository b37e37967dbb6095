#include "evident/wavelet.hpp"

#include <numbers>

#include "evident/errors.hpp"
#include "evident/ops.hpp"

namespace evident::wavelet {
namespace {

constexpr double kInvSqrt2 = std::numbers::sqrt2 / 2.0;

void check_levels(std::size_t length, std::size_t levels) {
  if (length == 0) throw DimensionError("dwt: empty input sequence");
  if (levels == 0) throw ConfigError("dwt: levels must be >= 1");
}

Var analysis_node(Var x) {
  const std::size_t ix = x.id;
  return x.tape->record(haar_analysis_step(x.value()), {x}, [ix](Tape& t, std::size_t self) {
    t.grad_mut(ix) += haar_synthesis_step(t.grad(self));
  });
}

Var synthesis_node(Var stacked) {
  const std::size_t is = stacked.id;
  return stacked.tape->record(haar_synthesis_step(stacked.value()), {stacked},
                              [is](Tape& t, std::size_t self) {
                                t.grad_mut(is) += haar_analysis_step(t.grad(self));
                              });
}

}  // namespace

std::size_t padded_length(std::size_t length, std::size_t levels) {
  const std::size_t block = std::size_t{1} << levels;
  return (length + block - 1) / block * block;
}

Matrix haar_analysis_step(const Matrix& x) {
  if (x.rows() % 2 != 0) {
    throw DimensionError("haar_analysis_step: odd row count " + std::to_string(x.rows()));
  }
  const std::size_t half = x.rows() / 2, cols = x.cols();
  Matrix out(x.rows(), cols);
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double even = x(2 * k, c), odd = x(2 * k + 1, c);
      out(k, c) = (even + odd) * kInvSqrt2;
      out(half + k, c) = (even - odd) * kInvSqrt2;
    }
  }
  return out;
}

Matrix haar_synthesis_step(const Matrix& stacked) {
  if (stacked.rows() % 2 != 0) {
    throw DimensionError("haar_synthesis_step: odd row count " + std::to_string(stacked.rows()));
  }
  const std::size_t half = stacked.rows() / 2, cols = stacked.cols();
  Matrix out(stacked.rows(), cols);
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double a = stacked(k, c), d = stacked(half + k, c);
      out(2 * k, c) = (a + d) * kInvSqrt2;
      out(2 * k + 1, c) = (a - d) * kInvSqrt2;
    }
  }
  return out;
}

WaveletPyramid dwt(const Matrix& x, std::size_t levels) {
  check_levels(x.rows(), levels);
  const std::size_t padded = padded_length(x.rows(), levels);
  Matrix current(padded, x.cols());
  std::copy(x.data().begin(), x.data().end(), current.data().begin());

  WaveletPyramid p;
  p.original_length = x.rows();
  for (std::size_t l = 0; l < levels; ++l) {
    Matrix stacked = haar_analysis_step(current);
    const std::size_t half = stacked.rows() / 2, cols = stacked.cols();
    Matrix approx(half, cols), detail(half, cols);
    std::copy_n(stacked.data().begin(), half * cols, approx.data().begin());
    std::copy_n(stacked.data().begin() + static_cast<std::ptrdiff_t>(half * cols), half * cols,
                detail.data().begin());
    p.high_bands.push_back(std::move(detail));
    current = std::move(approx);
  }
  p.low_band = std::move(current);
  return p;
}

Matrix idwt(const WaveletPyramid& p) {
  if (p.high_bands.empty()) throw DimensionError("idwt: pyramid has no detail bands");
  Matrix current = p.low_band;
  for (std::size_t l = p.high_bands.size(); l-- > 0;) {
    const Matrix& detail = p.high_bands[l];
    if (!detail.same_shape(current)) {
      throw DimensionError("idwt: level " + std::to_string(l + 1) + " detail " +
                           detail.shape_string() + " vs approximation " + current.shape_string());
    }
    Matrix stacked(current.rows() * 2, current.cols());
    std::copy(current.data().begin(), current.data().end(), stacked.data().begin());
    std::copy(detail.data().begin(), detail.data().end(),
              stacked.data().begin() + static_cast<std::ptrdiff_t>(current.size()));
    current = haar_synthesis_step(stacked);
  }
  if (p.original_length > current.rows()) {
    throw DimensionError("idwt: original length exceeds reconstructed length");
  }
  if (p.original_length == current.rows()) return current;
  const auto keep = current.data().first(p.original_length * current.cols());
  return Matrix(p.original_length, current.cols(), std::vector<double>(keep.begin(), keep.end()));
}

VarPyramid dwt(Var x, std::size_t levels) {
  check_levels(x.rows(), levels);
  VarPyramid p;
  p.original_length = x.rows();
  Var current = ops::pad_rows(x, padded_length(x.rows(), levels));
  for (std::size_t l = 0; l < levels; ++l) {
    Var stacked = analysis_node(current);
    const std::size_t half = stacked.rows() / 2;
    p.high_bands.push_back(ops::slice_rows(stacked, half, half));
    current = ops::slice_rows(stacked, 0, half);
  }
  p.low_band = current;
  return p;
}

Var idwt(const VarPyramid& p) {
  if (p.high_bands.empty()) throw DimensionError("idwt: pyramid has no detail bands");
  Var current = p.low_band;
  for (std::size_t l = p.high_bands.size(); l-- > 0;) {
    if (!p.high_bands[l].value().same_shape(current.value())) {
      throw DimensionError("idwt: level " + std::to_string(l + 1) + " detail shape mismatch");
    }
    const Var parts[] = {current, p.high_bands[l]};
    current = synthesis_node(ops::concat_rows(parts));
  }
  if (p.original_length > current.rows()) {
    throw DimensionError("idwt: original length exceeds reconstructed length");
  }
  return p.original_length == current.rows() ? current
                                             : ops::slice_rows(current, 0, p.original_length);
}

}  // namespace evident::wavelet
