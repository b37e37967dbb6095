#include "evident/ffe.hpp"

#include "evident/errors.hpp"

namespace evident::ffe {

const char* to_string(ExpertLayout layout) {
  switch (layout) {
    case ExpertLayout::Heterogeneous: return "heterogeneous";
    case ExpertLayout::AllConv: return "all-cnn";
    case ExpertLayout::AllAttention: return "all-transformer";
    case ExpertLayout::Reversed: return "reversed";
    case ExpertLayout::SingleShared: return "single-shared";
  }
  return "?";
}

ExpertLayout expert_layout_from_string(const std::string& name) {
  for (auto l : {ExpertLayout::Heterogeneous, ExpertLayout::AllConv, ExpertLayout::AllAttention,
                 ExpertLayout::Reversed, ExpertLayout::SingleShared}) {
    if (name == to_string(l)) return l;
  }
  throw ConfigError("unknown expert layout: " + name);
}

void FfeConfig::validate() const {
  if (levels < 1) throw ConfigError("ffe: levels must be >= 1");
  if (hidden_dim < 1) throw ConfigError("ffe: hidden_dim must be >= 1");
  if (gate_hidden < 1) throw ConfigError("ffe: gate_hidden must be >= 1");
  if (kernel_size % 2 == 0) {
    throw ConfigError("ffe: kernel size must be odd, got " + std::to_string(kernel_size));
  }
  if (forced_gates && forced_gates->size() != levels + 1) {
    throw ConfigError("ffe: forced gate vector must have levels + 1 entries");
  }
}

TemporalEncoder::TemporalEncoder(ParameterSet& ps, const std::string& name, std::size_t input_dim,
                                 const FfeConfig& cfg, Rng& rng)
    : input_(Linear::create(ps, name + ".input", input_dim, cfg.hidden_dim, rng)),
      use_attention_(cfg.temporal_attention) {
  if (use_attention_) {
    attention_ = Attention::create(ps, name + ".attn", cfg.hidden_dim, rng);
    norm_ = LayerNorm::create(ps, name + ".norm", cfg.hidden_dim);
  }
}

Var TemporalEncoder::forward(Tape& tape, Var x) const {
  if (x.rows() == 0) throw DimensionError("temporal_encode: empty sequence");
  Var h = input_.forward(tape, x);
  if (!use_attention_) return h;
  return norm_.forward(tape, ops::add(h, attention_.forward(tape, h)));
}

FrequencyRefiner::FrequencyRefiner(ParameterSet& ps, const std::string& name, const FfeConfig& cfg,
                                   Rng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t bands = cfg.levels + 1;
  auto add_conv = [&](const std::string& n) {
    convs_.push_back(Conv1d::create(ps, n, cfg.hidden_dim, cfg.kernel_size, rng));
    return Expert{Kind::Conv, convs_.size() - 1};
  };
  auto add_attention = [&](const std::string& n) {
    attentions_.push_back(Attention::create(ps, n, cfg.hidden_dim, rng));
    return Expert{Kind::Attention, attentions_.size() - 1};
  };
  if (cfg.layout == ExpertLayout::SingleShared) {
    const Expert shared = add_conv(name + ".expert.shared");
    experts_.assign(bands, shared);
  } else {
    for (std::size_t b = 0; b < bands; ++b) {
      const bool low = b == cfg.levels;
      const std::string n = name + ".expert." + (low ? std::string("low") : "high" + std::to_string(b + 1));
      bool conv = false;
      switch (cfg.layout) {
        case ExpertLayout::Heterogeneous: conv = !low; break;
        case ExpertLayout::Reversed: conv = low; break;
        case ExpertLayout::AllConv: conv = true; break;
        case ExpertLayout::AllAttention: conv = false; break;
        case ExpertLayout::SingleShared: break;
      }
      experts_.push_back(conv ? add_conv(n) : add_attention(n));
    }
  }
  if (cfg.learned_gate) {
    gate_ = Mlp::create(ps, name + ".gate", bands * cfg.hidden_dim, cfg.gate_hidden, bands, rng);
  }
}

Var FrequencyRefiner::run_expert(Tape& tape, std::size_t band, Var x) const {
  const Expert& e = experts_[band];
  return e.kind == Kind::Conv ? convs_[e.slot].forward(tape, x)
                              : attentions_[e.slot].forward(tape, x);
}

RefineResult FrequencyRefiner::forward(Tape& tape, Var h) const {
  if (h.cols() != cfg_.hidden_dim) {
    throw DimensionError("refine: expected " + std::to_string(cfg_.hidden_dim) + " channels, got " +
                         std::to_string(h.cols()));
  }
  wavelet::VarPyramid pyr = wavelet::dwt(h, cfg_.levels);
  std::vector<Var> bands = pyr.high_bands;
  bands.push_back(pyr.low_band);

  Var gates;
  if (cfg_.forced_gates) {
    gates = tape.constant(Matrix::row_vector(*cfg_.forced_gates));
  } else if (!cfg_.learned_gate) {
    gates = tape.constant(Matrix(1, bands.size(), 1.0));
  } else {
    std::vector<Var> means;
    means.reserve(bands.size());
    for (Var b : bands) means.push_back(ops::mean_rows(b));
    Var context = ops::concat_cols(means);
    gates = ops::sigmoid(gate_.forward(tape, context));
  }

  for (std::size_t i = 0; i < bands.size(); ++i) {
    Var delta = run_expert(tape, i, bands[i]);
    bands[i] = ops::add(bands[i], ops::scale_by(delta, ops::slice_cols(gates, i, 1)));
  }
  wavelet::VarPyramid refined;
  refined.original_length = pyr.original_length;
  refined.high_bands.assign(bands.begin(), bands.end() - 1);
  refined.low_band = bands.back();
  return RefineResult{wavelet::idwt(refined), gates};
}

Var pool(Var z) {
  if (z.rows() == 0) throw DimensionError("pool: empty sequence");
  return ops::mean_rows(z);
}

FeatureExtractor::FeatureExtractor(ParameterSet& ps, const std::string& name,
                                   std::size_t input_dim, const FfeConfig& cfg, Rng& rng)
    : cfg_(cfg), encoder_(ps, name + ".temporal", input_dim, cfg, rng) {
  if (cfg.frequency_refinement) refiner_ = FrequencyRefiner(ps, name + ".refine", cfg, rng);
}

Var FeatureExtractor::forward(Tape& tape, Var x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("feature extractor: expected " + std::to_string(input_dim()) +
                         " input channels, got " + std::to_string(x.cols()));
  }
  Var h = encoder_.forward(tape, x);
  if (cfg_.frequency_refinement) h = refiner_.forward(tape, h).output;
  return pool(h);
}

}  // namespace evident::ffe
