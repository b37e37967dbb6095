#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace evident {

// Dense row-major matrix of doubles. Scalars are 1x1 matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix scalar(double v) { return Matrix(1, 1, v); }
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> values);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  // Value of a 1x1 matrix.
  double item() const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  Matrix transposed() const;
  double sum() const;
  double squared_norm() const;
  double max_abs() const;
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);

void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace evident
