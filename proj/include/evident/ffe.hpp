#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "evident/layers.hpp"
#include "evident/wavelet.hpp"

// Frequency-aware feature extraction: temporal encoding, wavelet decomposition,
// per-band expert refinement under a learned gate, reconstruction, pooling.
namespace evident::ffe {

// Which expert family handles which band.
enum class ExpertLayout {
  Heterogeneous,  // conv on detail bands, attention on the approximation band
  AllConv,
  AllAttention,
  Reversed,       // attention on detail bands, conv on the approximation band
  SingleShared,   // one conv expert shared by every band (no mixture)
};

const char* to_string(ExpertLayout layout);
ExpertLayout expert_layout_from_string(const std::string& name);

struct FfeConfig {
  std::size_t levels = 2;
  std::size_t hidden_dim = 32;
  std::size_t kernel_size = 3;
  std::size_t gate_hidden = 32;
  ExpertLayout layout = ExpertLayout::Heterogeneous;
  bool temporal_attention = true;
  bool frequency_refinement = true;
  bool learned_gate = true;  // false: every gate fixed at 1
  // Test hook: overrides the gate vector (length levels + 1, detail bands first).
  std::optional<std::vector<double>> forced_gates;

  void validate() const;
};

// Input projection to D, then one self-attention block with residual and layer norm.
class TemporalEncoder {
 public:
  TemporalEncoder() = default;
  TemporalEncoder(ParameterSet& ps, const std::string& name, std::size_t input_dim,
                  const FfeConfig& cfg, Rng& rng);

  std::size_t input_dim() const { return input_.in_dim(); }
  Var forward(Tape& tape, Var x) const;

 private:
  Linear input_;
  Attention attention_;
  LayerNorm norm_;
  bool use_attention_ = true;
};

struct RefineResult {
  Var output;  // T x D
  Var gates;   // 1 x (L + 1), detail bands first then approximation
};

class FrequencyRefiner {
 public:
  FrequencyRefiner() = default;
  FrequencyRefiner(ParameterSet& ps, const std::string& name, const FfeConfig& cfg, Rng& rng);

  RefineResult forward(Tape& tape, Var h) const;

  // Output-layer bias of the gate network, exposed for initialization overrides.
  Parameter* gate_bias() const { return gate_.second.bias; }
  std::size_t conv_expert_count() const { return convs_.size(); }
  std::size_t attention_expert_count() const { return attentions_.size(); }

 private:
  enum class Kind { Conv, Attention };
  struct Expert {
    Kind kind;
    std::size_t slot;
  };
  Var run_expert(Tape& tape, std::size_t band, Var x) const;

  FfeConfig cfg_;
  std::vector<Conv1d> convs_;
  std::vector<Attention> attentions_;
  std::vector<Expert> experts_;  // per band, detail bands first
  Mlp gate_;
};

// Temporal average pooling: T x D -> 1 x D.
Var pool(Var z);

// Full per-modality extractor: encode, refine, pool.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(ParameterSet& ps, const std::string& name, std::size_t input_dim,
                   const FfeConfig& cfg, Rng& rng);

  std::size_t input_dim() const { return encoder_.input_dim(); }
  // Returns the pooled 1 x D representation.
  Var forward(Tape& tape, Var x) const;

 private:
  FfeConfig cfg_;
  TemporalEncoder encoder_;
  FrequencyRefiner refiner_;
};

}  // namespace evident::ffe
