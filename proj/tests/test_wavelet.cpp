#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "evident/errors.hpp"
#include "evident/ops.hpp"
#include "evident/wavelet.hpp"
#include "support/test_support.hpp"

namespace evident::wavelet {
namespace {

using evident::testing::random_matrix;

double pyramid_energy(const WaveletPyramid& p) {
  double e = p.low_band.squared_norm();
  for (const auto& h : p.high_bands) e += h.squared_norm();
  return e;
}

TEST(Dwt, ConstantSignalHasNoDetail) {
  const WaveletPyramid p = dwt(Matrix::column(std::vector<double>{1, 1, 1, 1}), 1);
  ASSERT_EQ(p.levels(), 1u);
  EXPECT_NEAR(p.low_band[0], std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(p.low_band[1], std::numbers::sqrt2, 1e-15);
  EXPECT_EQ(p.high_bands[0].max_abs(), 0.0);
}

TEST(Dwt, RampMatchesHaarMatrixProduct) {
  // Orthonormal one-level Haar analysis matrix: approximation rows then detail rows.
  const double s = 1.0 / std::numbers::sqrt2;
  const Matrix haar = Matrix::from_rows({{s, s, 0, 0}, {0, 0, s, s}, {s, -s, 0, 0}, {0, 0, s, -s}});
  const Matrix x = Matrix::column(std::vector<double>{1, 2, 3, 4});
  const Matrix expected = matmul(haar, x);

  const WaveletPyramid p = dwt(x, 1);
  EXPECT_NEAR(p.low_band[0], expected[0], 1e-15);
  EXPECT_NEAR(p.low_band[1], expected[1], 1e-15);
  EXPECT_NEAR(p.high_bands[0][0], expected[2], 1e-15);
  EXPECT_NEAR(p.high_bands[0][1], expected[3], 1e-15);
  EXPECT_NEAR(p.low_band[0], 3.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(p.low_band[1], 7.0 / std::numbers::sqrt2, 1e-15);
  EXPECT_NEAR(p.high_bands[0][0], -1.0 / std::numbers::sqrt2, 1e-15);

  EXPECT_LT(max_abs_diff(idwt(p), x), 1e-15);
}

TEST(Dwt, BandLengthsHalvePerLevel) {
  std::mt19937_64 rng(1);
  const WaveletPyramid p = dwt(random_matrix(64, 3, rng), 3);
  EXPECT_EQ(p.high_bands[0].rows(), 32u);
  EXPECT_EQ(p.high_bands[1].rows(), 16u);
  EXPECT_EQ(p.high_bands[2].rows(), 8u);
  EXPECT_EQ(p.low_band.rows(), 8u);
}

TEST(Dwt, PerfectReconstructionAndParseval) {
  std::mt19937_64 rng(17);
  for (std::size_t levels : {1u, 2u, 3u}) {
    for (std::size_t k : {1u, 2u, 5u}) {
      const std::size_t T = (std::size_t{1} << levels) * k;
      const Matrix x = random_matrix(T, 4, rng);
      const WaveletPyramid p = dwt(x, levels);
      EXPECT_LT(max_abs_diff(idwt(p), x), 1e-9) << "L=" << levels << " T=" << T;
      EXPECT_NEAR(pyramid_energy(p), x.squared_norm(), 1e-9);
    }
  }
}

TEST(Dwt, ZeroPaddingRoundTripsOddLengths) {
  std::mt19937_64 rng(5);
  const Matrix x = random_matrix(13, 2, rng);
  const WaveletPyramid p = dwt(x, 3);
  EXPECT_EQ(p.original_length, 13u);
  EXPECT_EQ(p.low_band.rows(), 2u);  // padded to 16
  EXPECT_NEAR(pyramid_energy(p), x.squared_norm(), 1e-9);
  EXPECT_LT(max_abs_diff(idwt(p), x), 1e-9);
}

TEST(Dwt, ConstantSurvivesDroppingDetailBands) {
  WaveletPyramid p = dwt(Matrix(16, 3, 2.5), 2);
  for (auto& h : p.high_bands) h *= 0.0;
  EXPECT_LT(max_abs_diff(idwt(p), Matrix(16, 3, 2.5)), 1e-12);
}

TEST(Dwt, IsLinear) {
  std::mt19937_64 rng(8);
  const Matrix x = random_matrix(24, 3, rng), y = random_matrix(24, 3, rng);
  const double a = 1.7, b = -0.4;
  const WaveletPyramid px = dwt(x, 3), py = dwt(y, 3), pxy = dwt(a * x + b * y, 3);
  EXPECT_LT(max_abs_diff(pxy.low_band, a * px.low_band + b * py.low_band), 1e-9);
  for (std::size_t l = 0; l < 3; ++l) {
    EXPECT_LT(max_abs_diff(pxy.high_bands[l], a * px.high_bands[l] + b * py.high_bands[l]), 1e-9);
  }
}

TEST(Dwt, ErrorPaths) {
  EXPECT_THROW(dwt(Matrix(0, 3), 1), DimensionError);
  EXPECT_THROW(dwt(Matrix(4, 3), 0), ConfigError);
  WaveletPyramid p = dwt(Matrix(8, 2, 1.0), 2);
  p.high_bands[1] = Matrix(3, 2);
  EXPECT_THROW(idwt(p), DimensionError);
}

TEST(DwtGraph, MatchesMatrixTransform) {
  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(20, 3, rng);
  const WaveletPyramid ref = dwt(x, 2);
  Tape tape;
  VarPyramid p = dwt(tape.constant(x), 2);
  EXPECT_LT(max_abs_diff(p.low_band.value(), ref.low_band), 1e-15);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_LT(max_abs_diff(p.high_bands[l].value(), ref.high_bands[l]), 1e-15);
  }
  EXPECT_LT(max_abs_diff(idwt(p).value(), x), 1e-12);
}

TEST(DwtGraph, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (std::size_t T : {8u, 11u, 16u}) {
    auto res = evident::testing::gradcheck(
        [&](Tape& t, std::span<const Var> in) {
          VarPyramid p = dwt(in[0], 2);
          p.high_bands[0] = ops::square(p.high_bands[0]);
          p.low_band = ops::sigmoid(p.low_band);
          return ops::sum(ops::mul(idwt(p), t.constant(Matrix(T, 2, 0.3))));
        },
        {random_matrix(T, 2, rng)});
    EXPECT_LT(res.max_rel_error, 1e-4) << "T=" << T;
  }
}

}  // namespace
}  // namespace evident::wavelet
