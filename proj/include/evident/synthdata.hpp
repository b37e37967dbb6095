#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evident/matrix.hpp"

// Synthetic two-modality regression sequences with a score-driven shared
// factor, nuisance private factors and score-dependent noise.
namespace evident::synth {

struct GenConfig {
  std::size_t n_samples = 400;
  std::size_t n_test = 100;  // last n_test samples form the test split
  std::size_t T = 64;
  std::size_t D_v = 16;
  std::size_t D_a = 12;
  std::size_t latent_dim = 4;
  double shared_strength = 1.0;
  double private_strength = 0.5;
  // Per-step latent noise standard deviation is noise_scale * (1 + hetero * normalized score).
  double noise_scale = 0.3;
  double hetero = 2.0;
  // Score-independent per-feature observation noise.
  double obs_noise = 0.1;
  // Target noise standard deviation is label_noise * (1 + hetero * normalized score);
  // targets are clamped to [score_low, score_high].
  double label_noise = 0.0;
  double score_low = 0.0;
  double score_high = 24.0;
  std::uint64_t seed = 7;
  double oversample_threshold = 15.0;
  std::size_t oversample_factor = 2;
  // Each sample drops a U(0, dropout_max) fraction of its time steps at generation.
  double dropout_max = 0.0;

  void validate() const;
};

struct LabeledSample {
  std::string id;
  Matrix visual;  // T x D_v
  Matrix audio;   // T x D_a
  double score = 0.0;
};

using Dataset = std::vector<LabeledSample>;

struct Split {
  Dataset train;
  Dataset test;
};

// Sample i depends only on (seed, i), so any subset is reproducible on its own.
Dataset generate(const GenConfig& cfg);
Split generate_split(const GenConfig& cfg);

// Zeroes each time step of each modality independently with probability `missing_rate`.
LabeledSample corrupt(const LabeledSample& s, double missing_rate, std::uint64_t seed);
// Sample k uses a stream derived from (seed, k).
Dataset corrupt(const Dataset& data, double missing_rate, std::uint64_t seed);

// Repeats every sample with score >= threshold `factor` times in total.
Dataset oversample(const Dataset& data, double threshold, std::size_t factor);

// One directory per split: <id>.visual.bin / <id>.audio.bin plus manifest.csv.
void save_split(const Dataset& data, const std::filesystem::path& dir);
Dataset load_split(const std::filesystem::path& dir);

// Binary matrix: uint64 rows, uint64 cols, then row-major little-endian doubles.
void write_matrix(const Matrix& m, const std::filesystem::path& file);
Matrix read_matrix(const std::filesystem::path& file);

}  // namespace evident::synth
