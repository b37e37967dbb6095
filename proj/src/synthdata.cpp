#include "evident/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "evident/errors.hpp"

namespace evident::synth {
namespace {

static_assert(std::endian::native == std::endian::little, "binary format assumes little endian");

enum Stream : std::uint64_t { kMixing = 0x6d69, kSample = 0x7361, kMask = 0x6d61 };

std::mt19937_64 stream(std::uint64_t seed, Stream tag, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

struct Mixing {
  Matrix shared_v, shared_a;    // latent x D_m
  Matrix private_v, private_a;  // latent x D_m
  std::vector<double> phase;    // per latent channel
};

Matrix gaussian(std::size_t rows, std::size_t cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = n(rng);
  return m;
}

Mixing make_mixing(const GenConfig& cfg) {
  auto rng = stream(cfg.seed, kMixing, 0);
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  Mixing m;
  m.shared_v = gaussian(cfg.latent_dim, cfg.D_v, sd, rng);
  m.shared_a = gaussian(cfg.latent_dim, cfg.D_a, sd, rng);
  m.private_v = gaussian(cfg.latent_dim, cfg.D_v, sd, rng);
  m.private_a = gaussian(cfg.latent_dim, cfg.D_a, sd, rng);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
  for (std::size_t j = 0; j < cfg.latent_dim; ++j) m.phase.push_back(ph(rng));
  return m;
}

// Temporal latent trajectory: amplitude_j (1 + 0.5 sin(w_j t + phase_j)).
Matrix trajectory(const std::vector<double>& amplitude, const std::vector<double>& phase,
                  std::size_t T) {
  Matrix c(T, amplitude.size());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < amplitude.size(); ++j) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(j + 1) / static_cast<double>(T);
      c(t, j) = amplitude[j] * (1.0 + 0.5 * std::sin(w * static_cast<double>(t) + phase[j]));
    }
  }
  return c;
}

void mask_rows(Matrix& m, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution drop(rate);
  for (std::size_t t = 0; t < m.rows(); ++t) {
    if (drop(rng)) {
      for (double& v : m.row(t)) v = 0.0;
    }
  }
}

LabeledSample make_sample(const GenConfig& cfg, const Mixing& mix, std::size_t index) {
  auto rng = stream(cfg.seed, kSample, index);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double s = unit(rng);
  LabeledSample out;
  out.id = "s" + std::to_string(index);
  out.score = cfg.score_low + s * (cfg.score_high - cfg.score_low);
  if (cfg.label_noise > 0.0) {
    const double eps = cfg.label_noise * (1.0 + cfg.hetero * s) * normal(rng);
    out.score = std::clamp(out.score + eps, cfg.score_low, cfg.score_high);
  }

  const double u = 2.0 * s - 1.0;
  std::vector<double> shared_amp(cfg.latent_dim);
  for (std::size_t j = 0; j < cfg.latent_dim; ++j) {
    shared_amp[j] = j % 2 == 0 ? u : u * u - 1.0 / 3.0;
  }
  Matrix shared = trajectory(shared_amp, mix.phase, cfg.T);
  // Score-dependent noise enters the shared latent path, so it is common to all
  // channels and only averages out over observed time steps.
  const double sigma = cfg.noise_scale * (1.0 + cfg.hetero * s);
  if (sigma > 0.0) shared += gaussian(cfg.T, cfg.latent_dim, sigma, rng);

  auto private_part = [&] {
    std::vector<double> amp(cfg.latent_dim), phase(cfg.latent_dim);
    for (std::size_t j = 0; j < cfg.latent_dim; ++j) {
      amp[j] = normal(rng);
      phase[j] = 2.0 * std::numbers::pi * unit(rng);
    }
    return trajectory(amp, phase, cfg.T);
  };
  const Matrix pv = private_part();
  const Matrix pa = private_part();

  out.visual = cfg.shared_strength * matmul(shared, mix.shared_v) +
               cfg.private_strength * matmul(pv, mix.private_v);
  out.audio = cfg.shared_strength * matmul(shared, mix.shared_a) +
              cfg.private_strength * matmul(pa, mix.private_a);
  if (cfg.obs_noise > 0.0) {
    out.visual += gaussian(cfg.T, cfg.D_v, cfg.obs_noise, rng);
    out.audio += gaussian(cfg.T, cfg.D_a, cfg.obs_noise, rng);
  }
  if (cfg.dropout_max > 0.0) {
    const double rate = cfg.dropout_max * unit(rng);
    mask_rows(out.visual, rate, rng);
    mask_rows(out.audio, rate, rng);
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void GenConfig::validate() const {
  if (n_samples < 1 || T < 1 || D_v < 1 || D_a < 1 || latent_dim < 1) {
    throw ConfigError("gen: all counts must be >= 1");
  }
  if (n_test > n_samples) throw ConfigError("gen: n_test exceeds n_samples");
  if (shared_strength < 0 || private_strength < 0 || noise_scale < 0 || hetero < 0 ||
      obs_noise < 0 || label_noise < 0) {
    throw ConfigError("gen: strengths and noise scales must be >= 0");
  }
  if (!(score_low < score_high)) throw ConfigError("gen: score_low must be < score_high");
  if (oversample_factor < 1) throw ConfigError("gen: oversample_factor must be >= 1");
  if (!(dropout_max >= 0.0 && dropout_max < 1.0)) {
    throw ConfigError("gen: dropout_max must lie in [0, 1)");
  }
}

Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  const Mixing mix = make_mixing(cfg);
  Dataset out;
  out.reserve(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) out.push_back(make_sample(cfg, mix, i));
  return out;
}

Split generate_split(const GenConfig& cfg) {
  Dataset all = generate(cfg);
  const auto cut = static_cast<std::ptrdiff_t>(cfg.n_samples - cfg.n_test);
  return Split{Dataset(all.begin(), all.begin() + cut), Dataset(all.begin() + cut, all.end())};
}

LabeledSample corrupt(const LabeledSample& s, double missing_rate, std::uint64_t seed) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    throw ConfigError("corrupt: missing rate must lie in [0, 1), got " +
                      format_double(missing_rate));
  }
  LabeledSample out = s;
  if (missing_rate == 0.0) return out;
  std::mt19937_64 rng(seed);
  mask_rows(out.visual, missing_rate, rng);
  mask_rows(out.audio, missing_rate, rng);
  return out;
}

Dataset corrupt(const Dataset& data, double missing_rate, std::uint64_t seed) {
  Dataset out;
  out.reserve(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    out.push_back(corrupt(data[k], missing_rate, stream(seed, kMask, k)()));
  }
  return out;
}

Dataset oversample(const Dataset& data, double threshold, std::size_t factor) {
  if (factor < 1) throw ConfigError("oversample: factor must be >= 1");
  Dataset out;
  for (const auto& s : data) {
    const std::size_t copies = s.score >= threshold ? factor : 1;
    for (std::size_t c = 0; c < copies; ++c) out.push_back(s);
  }
  return out;
}

void write_matrix(const Matrix& m, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + file.string());
  const std::uint64_t dims[2] = {m.rows(), m.cols()};
  os.write(reinterpret_cast<const char*>(dims), sizeof dims);
  os.write(reinterpret_cast<const char*>(m.data().data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!os) throw ConfigError("write failed: " + file.string());
}

Matrix read_matrix(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw ConfigError("cannot read " + file.string());
  std::uint64_t dims[2] = {0, 0};
  is.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!is || dims[0] > (1u << 24) || dims[1] > (1u << 24)) {
    throw ConfigError("corrupt matrix header: " + file.string());
  }
  Matrix m(dims[0], dims[1]);
  is.read(reinterpret_cast<char*>(m.data().data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!is) throw ConfigError("truncated matrix file: " + file.string());
  return m;
}

void save_split(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw ConfigError("cannot write manifest in " + dir.string());
  manifest << "id,T,D_v,D_a,score\n";
  for (const auto& s : data) {
    write_matrix(s.visual, dir / (s.id + ".visual.bin"));
    write_matrix(s.audio, dir / (s.id + ".audio.bin"));
    manifest << s.id << ',' << s.visual.rows() << ',' << s.visual.cols() << ','
             << s.audio.cols() << ',' << format_double(s.score) << '\n';
  }
}

Dataset load_split(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) throw ConfigError("no manifest.csv in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  if (line != "id,T,D_v,D_a,score") throw ConfigError("unexpected manifest header in " + dir.string());
  Dataset out;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, field;
    std::getline(row, id, ',');
    std::size_t dims[3];
    for (auto& d : dims) {
      std::getline(row, field, ',');
      d = std::stoul(field);
    }
    std::getline(row, field, ',');
    LabeledSample s{id, read_matrix(dir / (id + ".visual.bin")),
                    read_matrix(dir / (id + ".audio.bin")), std::stod(field)};
    if (s.visual.rows() != dims[0] || s.visual.cols() != dims[1] || s.audio.rows() != dims[0] ||
        s.audio.cols() != dims[2]) {
      throw DimensionError("sample " + id + " does not match its manifest row");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace evident::synth
