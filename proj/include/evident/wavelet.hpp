#pragma once

#include <cstddef>
#include <vector>

#include "evident/matrix.hpp"
#include "evident/tape.hpp"

// Orthonormal Haar analysis/synthesis along the time axis (rows), applied
// independently to every feature channel (column).
namespace evident::wavelet {

struct WaveletPyramid {
  // high_bands[l] is the level-(l+1) detail band: padded_length / 2^(l+1) rows.
  std::vector<Matrix> high_bands;
  // padded_length / 2^L rows.
  Matrix low_band;
  std::size_t original_length = 0;

  std::size_t levels() const { return high_bands.size(); }
};

// Smallest multiple of 2^levels that is >= length.
std::size_t padded_length(std::size_t length, std::size_t levels);

// One analysis step over an even number of rows: [approx; detail] stacked vertically.
Matrix haar_analysis_step(const Matrix& x);
// Inverse of haar_analysis_step.
Matrix haar_synthesis_step(const Matrix& stacked);

// Right-pads with zero rows to a multiple of 2^levels and decomposes.
WaveletPyramid dwt(const Matrix& x, std::size_t levels);
// Reconstructs and truncates back to original_length.
Matrix idwt(const WaveletPyramid& pyramid);

// Same transforms recorded on a tape; gradients are the transposed (= inverse) maps.
struct VarPyramid {
  std::vector<Var> high_bands;
  Var low_band;
  std::size_t original_length = 0;
};

VarPyramid dwt(Var x, std::size_t levels);
Var idwt(const VarPyramid& pyramid);

}  // namespace evident::wavelet
