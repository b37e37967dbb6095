#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evident/disentangle.hpp"
#include "evident/evidential.hpp"
#include "evident/ffe.hpp"

namespace evident {

// Component switches for the ablation study. Defaults describe the full model.
struct AblationFlags {
  bool temporal = true;        // self-attention in the temporal encoder
  bool freq_refine = true;     // wavelet refinement stage
  bool moe = true;             // false: one conv expert shared by all bands
  bool all_cnn = false;
  bool all_transformer = false;
  bool reversed_moe = false;
  bool gating = true;          // false: every gate fixed at 1
  bool orth = true;
  bool aln = true;
  bool rec = true;
  bool entangled = false;      // pooled features feed one head, no disentangling
  bool shared_only = false;
  bool private_only = false;
  bool single_head = false;    // one head over all branch features
  bool nig = true;             // false: scalar regression head trained with MSE
  bool fusion = true;          // false: parameter averaging instead of Bayesian fusion

  void validate() const;
  ffe::ExpertLayout layout() const;

  // Named presets; "full" is the default model.
  static AblationFlags from_name(const std::string& name);
  static const std::vector<std::string>& names();
};

struct ModelConfig {
  std::size_t visual_dim = 16;
  std::size_t audio_dim = 12;
  std::size_t hidden_dim = 32;
  std::size_t levels = 2;
  std::size_t kernel_size = 3;
  int cmd_order = 5;
  AblationFlags flags;

  void validate() const;
  ffe::FfeConfig ffe_config() const;
};

enum class Branch { Shared = 0, PrivateVisual = 1, PrivateAudio = 2, Joint = 3 };

struct SampleOutput {
  Var pooled_v;  // 1 x D
  Var pooled_a;  // 1 x D
  std::optional<disentangle::DisentangledSet> set;
  // Evidential branches that feed the fusion, with their identities.
  std::vector<evidential::NigVar> branches;
  std::vector<Branch> branch_ids;
  std::optional<evidential::NigVar> fused;
  Var point;  // 1x1 prediction in normalized target units
};

// Two feature extractors, the disentangler and the evidence heads.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return ps_; }
  const ParameterSet& params() const { return ps_; }

  SampleOutput forward(Tape& tape, const Matrix& visual, const Matrix& audio) const;
  const disentangle::Disentangler& disentangler() const { return dis_; }

  // Targets are standardized with training statistics.
  void set_target_scaling(double mean, double scale);
  double target_mean() const { return target_mean_; }
  double target_scale() const { return target_scale_; }
  double normalize(double y) const { return (y - target_mean_) / target_scale_; }

  // Fused evidence in original score units; the deterministic ablation reports
  // zero uncertainty and a zero-width interval.
  evidential::UncertaintyReport predict(const Matrix& visual, const Matrix& audio,
                                        double coverage) const;

 private:
  ModelConfig cfg_;
  ParameterSet ps_;
  ffe::FeatureExtractor visual_;
  ffe::FeatureExtractor audio_;
  disentangle::Disentangler dis_;
  std::vector<std::pair<Branch, evidential::NigHead>> heads_;
  Linear point_head_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
};

}  // namespace evident
