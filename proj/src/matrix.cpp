#include "evident/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "evident/errors.hpp"

namespace evident {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Matrix: data length " + std::to_string(data_.size()) +
                         " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
    std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
    ++i;
  }
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

double Matrix::item() const {
  if (rows_ != 1 || cols_ != 1) throw DimensionError("Matrix::item on " + shape_string());
  return data_[0];
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

double Matrix::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Matrix::squared_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return s;
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " * " + b.shape_string());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix out(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_tn: " + a.shape_string() + "^T * " + b.shape_string());
  }
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Matrix out(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = pa + p * n;
    const double* brow = pb + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + a.shape_string() + " * " + b.shape_string() + "^T");
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Matrix out(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      po[i * m + j] = s;
    }
  }
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(what) + ": shape " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

}  // namespace evident
