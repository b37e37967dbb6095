#include "evident/model.hpp"

#include <cmath>

#include "evident/errors.hpp"

namespace evident {

namespace {

struct Preset {
  const char* name;
  void (*apply)(AblationFlags&);
};

const Preset kPresets[] = {
    {"full", [](AblationFlags&) {}},
    {"no-temporal", [](AblationFlags& f) { f.temporal = false; }},
    {"no-freq-refine", [](AblationFlags& f) { f.freq_refine = false; }},
    {"no-moe", [](AblationFlags& f) { f.moe = false; }},
    {"all-cnn", [](AblationFlags& f) { f.all_cnn = true; }},
    {"all-transformer", [](AblationFlags& f) { f.all_transformer = true; }},
    {"reversed-moe", [](AblationFlags& f) { f.reversed_moe = true; }},
    {"no-gating", [](AblationFlags& f) { f.gating = false; }},
    {"no-struct", [](AblationFlags& f) { f.orth = f.aln = f.rec = false; }},
    {"no-aln", [](AblationFlags& f) { f.aln = false; }},
    {"no-orth", [](AblationFlags& f) { f.orth = false; }},
    {"no-rec", [](AblationFlags& f) { f.rec = false; }},
    {"entangled", [](AblationFlags& f) { f.entangled = true; }},
    {"shared-only", [](AblationFlags& f) { f.shared_only = true; }},
    {"private-only", [](AblationFlags& f) { f.private_only = true; }},
    {"single-head", [](AblationFlags& f) { f.single_head = true; }},
    {"nig-no-fusion", [](AblationFlags& f) { f.fusion = false; }},
    {"deterministic", [](AblationFlags& f) { f.nig = f.fusion = false; }},
};

Var concat(std::initializer_list<Var> parts) {
  return ops::concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

}  // namespace

void AblationFlags::validate() const {
  if (static_cast<int>(!moe) + all_cnn + all_transformer + reversed_moe > 1) {
    throw ConfigError("ablation: expert layout flags are mutually exclusive");
  }
  if (static_cast<int>(entangled) + shared_only + private_only + single_head > 1) {
    throw ConfigError("ablation: branch layout flags are mutually exclusive");
  }
  if (!nig && fusion) throw ConfigError("ablation: Bayesian fusion requires NIG heads");
}

ffe::ExpertLayout AblationFlags::layout() const {
  if (!moe) return ffe::ExpertLayout::SingleShared;
  if (all_cnn) return ffe::ExpertLayout::AllConv;
  if (all_transformer) return ffe::ExpertLayout::AllAttention;
  if (reversed_moe) return ffe::ExpertLayout::Reversed;
  return ffe::ExpertLayout::Heterogeneous;
}

AblationFlags AblationFlags::from_name(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) {
      AblationFlags f;
      p.apply(f);
      return f;
    }
  }
  throw ConfigError("unknown ablation: " + name);
}

const std::vector<std::string>& AblationFlags::names() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v;
    for (const auto& p : kPresets) v.emplace_back(p.name);
    return v;
  }();
  return all;
}

void ModelConfig::validate() const {
  if (visual_dim < 1 || audio_dim < 1) throw ConfigError("model: input dims must be >= 1");
  if (cmd_order < 1) throw ConfigError("model: cmd_order must be >= 1");
  flags.validate();
  ffe_config().validate();
}

ffe::FfeConfig ModelConfig::ffe_config() const {
  ffe::FfeConfig c;
  c.levels = levels;
  c.hidden_dim = hidden_dim;
  c.kernel_size = kernel_size;
  c.gate_hidden = hidden_dim;
  c.layout = flags.layout();
  c.temporal_attention = flags.temporal;
  c.frequency_refinement = flags.freq_refine;
  c.learned_gate = flags.gating;
  return c;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const auto fc = cfg_.ffe_config();
  const std::size_t D = cfg_.hidden_dim;
  const AblationFlags& f = cfg_.flags;
  visual_ = ffe::FeatureExtractor(ps_, "visual", cfg_.visual_dim, fc, rng);
  audio_ = ffe::FeatureExtractor(ps_, "audio", cfg_.audio_dim, fc, rng);
  if (!f.entangled) dis_ = disentangle::Disentangler(ps_, "dis", D, rng);

  std::vector<std::pair<Branch, std::size_t>> layout;
  if (f.entangled) {
    layout = {{Branch::Joint, 2 * D}};
  } else if (f.single_head) {
    layout = {{Branch::Joint, 4 * D}};
  } else if (f.shared_only) {
    layout = {{Branch::Shared, 2 * D}};
  } else if (f.private_only) {
    layout = {{Branch::PrivateVisual, D}, {Branch::PrivateAudio, D}};
  } else {
    layout = {{Branch::Shared, 2 * D}, {Branch::PrivateVisual, D}, {Branch::PrivateAudio, D}};
  }
  if (f.nig) {
    static const char* names[] = {"head.shared", "head.private_v", "head.private_a", "head.joint"};
    for (auto [id, dim] : layout) {
      heads_.emplace_back(id, evidential::NigHead(ps_, names[static_cast<int>(id)], dim, rng));
    }
  } else {
    std::size_t total = 0;
    for (auto [id, dim] : layout) total += dim;
    point_head_ = Linear::create(ps_, "head.point", total, 1, rng);
  }
}

void Model::set_target_scaling(double mean, double scale) {
  if (!std::isfinite(mean) || !(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("target scaling must be finite with a positive scale");
  }
  target_mean_ = mean;
  target_scale_ = scale;
}

SampleOutput Model::forward(Tape& tape, const Matrix& visual, const Matrix& audio) const {
  SampleOutput out;
  out.pooled_v = visual_.forward(tape, tape.constant(visual));
  out.pooled_a = audio_.forward(tape, tape.constant(audio));
  const AblationFlags& f = cfg_.flags;

  std::vector<std::pair<Branch, Var>> features;
  if (f.entangled) {
    features = {{Branch::Joint, concat({out.pooled_v, out.pooled_a})}};
  } else {
    out.set = dis_.project(tape, out.pooled_v, out.pooled_a);
    const auto& s = *out.set;
    if (f.single_head) {
      features = {{Branch::Joint, concat({s.shared_joint, s.private_v, s.private_a})}};
    } else if (f.shared_only) {
      features = {{Branch::Shared, s.shared_joint}};
    } else if (f.private_only) {
      features = {{Branch::PrivateVisual, s.private_v}, {Branch::PrivateAudio, s.private_a}};
    } else {
      features = {{Branch::Shared, s.shared_joint},
                  {Branch::PrivateVisual, s.private_v},
                  {Branch::PrivateAudio, s.private_a}};
    }
  }

  if (!f.nig) {
    std::vector<Var> parts;
    for (const auto& [id, z] : features) parts.push_back(z);
    out.point = point_head_.forward(tape, ops::concat_cols(parts));
    return out;
  }
  for (std::size_t k = 0; k < features.size(); ++k) {
    out.branches.push_back(heads_[k].second.forward(tape, features[k].second));
    out.branch_ids.push_back(features[k].first);
  }
  out.fused = f.fusion ? evidential::fuse(out.branches) : evidential::average(out.branches);
  out.point = out.fused->delta;
  return out;
}

evidential::UncertaintyReport Model::predict(const Matrix& visual, const Matrix& audio,
                                             double coverage) const {
  Tape tape(false);
  const SampleOutput out = forward(tape, visual, audio);
  if (!out.fused) {
    const double score = target_mean_ + target_scale_ * out.point.item();
    return evidential::UncertaintyReport{score, 0.0, 0.0, score, score, coverage};
  }
  evidential::NIGParams p = out.fused->value();
  p.delta = target_mean_ + target_scale_ * p.delta;
  p.beta *= target_scale_ * target_scale_;
  return evidential::make_report(p, coverage);
}

}  // namespace evident
