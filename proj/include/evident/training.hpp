#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evident/errors.hpp"
#include "evident/model.hpp"
#include "evident/synthdata.hpp"

namespace evident {

struct LossWeights {
  double lambda_aln = 1.0;
  double lambda_rec = 0.001;
  double lambda_orth = 0.05;
  double lambda_aux = 0.2;
  double lambda_r = 1e-4;
  std::size_t burn_in = 20;  // curriculum length T in epochs

  void validate() const;
};

// Batch-mean loss components. `dis` is already weighted by lambda_orth; `aln`
// and `rec` are raw. evid_aux is ordered shared, private visual, private audio.
struct LossBreakdown {
  double struct_total = 0.0;
  double dis = 0.0;
  double aln = 0.0;
  double rec = 0.0;
  double evid_fused = 0.0;
  std::array<double, 3> evid_aux{};
  double mse_guide = 0.0;
  double eta_t = 0.0;
  double total = 0.0;

  // |total - recomputed total| given the auxiliary weight.
  double identity_residual(double lambda_aux) const;
  bool all_finite() const;
  std::string to_string() const;
};

// min(1, t / T).
double curriculum(std::size_t epoch, std::size_t burn_in);

struct BatchLoss {
  Var total;
  LossBreakdown breakdown;
};

// Full objective over a batch on one tape. Labels are normalized by the model.
BatchLoss total_loss(Tape& tape, const Model& model,
                     std::span<const synth::LabeledSample* const> batch,
                     const LossWeights& weights, std::size_t epoch);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig cfg);
  // Clips `grads` to the global norm bound, then updates. Returns the pre-clip norm.
  double step(ParameterSet& params, GradientSet& grads);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 4;
  AdamConfig adam;
  bool oversample = true;
  double oversample_threshold = 15.0;
  std::size_t oversample_factor = 2;
  double divergence_limit = 1e6;
  // Each training view drops a U(0, augment_mask_max) fraction of its time steps.
  double augment_mask_max = 0.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown mean;  // average over the epoch's steps
  double grad_norm = 0.0;  // mean pre-clip global gradient norm
};

// Raised when a step's loss is non-finite or exceeds the divergence limit.
struct DivergenceError : NumericalError {
  DivergenceError(const std::string& what, LossBreakdown last_finite, LossBreakdown failing)
      : NumericalError(what), last_finite(last_finite), failing(failing) {}
  LossBreakdown last_finite;
  LossBreakdown failing;
};

using StepCallback =
    std::function<void(std::size_t epoch, std::size_t step, const LossBreakdown& breakdown)>;

struct TrainResult {
  std::vector<EpochLog> epochs;
};

// Standardizes targets with the training statistics, then runs Adam over
// shuffled mini-batches (deterministic for a fixed seed).
TrainResult train(Model& model, const synth::Dataset& data, const TrainConfig& cfg,
                  const LossWeights& weights, const StepCallback& on_step = {});

// Per-epoch breakdown CSV.
void write_epoch_log(const std::vector<EpochLog>& log, std::ostream& os);

// Text checkpoint: model configuration, target scaling and every parameter
// matrix with a shape header; values use 17 significant digits.
void save_checkpoint(const Model& model, const std::filesystem::path& file);
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& file);

}  // namespace evident
