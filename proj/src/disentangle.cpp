#include "evident/disentangle.hpp"

#include "evident/errors.hpp"

namespace evident::disentangle {

Disentangler::Disentangler(ParameterSet& ps, const std::string& name, std::size_t dim, Rng& rng)
    : dim_(dim),
      shared_(Mlp::create(ps, name + ".shared", dim, dim, dim, rng)),
      private_v_(Mlp::create(ps, name + ".private_v", dim, dim, dim, rng)),
      private_a_(Mlp::create(ps, name + ".private_a", dim, dim, dim, rng)),
      norm_v_(LayerNorm::create(ps, name + ".decoder_v.norm", 2 * dim)),
      norm_a_(LayerNorm::create(ps, name + ".decoder_a.norm", 2 * dim)),
      decoder_v_(Mlp::create(ps, name + ".decoder_v", 2 * dim, dim, dim, rng)),
      decoder_a_(Mlp::create(ps, name + ".decoder_a", 2 * dim, dim, dim, rng)) {}

DisentangledSet Disentangler::project(Tape& tape, Var pooled_v, Var pooled_a) const {
  if (pooled_v.cols() != dim_ || pooled_a.cols() != dim_ || pooled_v.rows() != 1 ||
      pooled_a.rows() != 1) {
    throw DimensionError("project: expected 1x" + std::to_string(dim_) + " inputs, got " +
                         pooled_v.value().shape_string() + " and " +
                         pooled_a.value().shape_string());
  }
  DisentangledSet s;
  s.shared_v = shared_.forward(tape, pooled_v);
  s.shared_a = shared_.forward(tape, pooled_a);
  s.private_v = private_v_.forward(tape, pooled_v);
  s.private_a = private_a_.forward(tape, pooled_a);
  const Var parts[] = {s.shared_v, s.shared_a};
  s.shared_joint = ops::concat_cols(parts);
  return s;
}

Var Disentangler::decode(Tape& tape, const DisentangledSet& set, Modality m) const {
  const bool visual = m == Modality::Visual;
  const Var parts[] = {visual ? set.shared_v : set.shared_a, visual ? set.private_v : set.private_a};
  Var joined = (visual ? norm_v_ : norm_a_).forward(tape, ops::concat_cols(parts));
  return (visual ? decoder_v_ : decoder_a_).forward(tape, joined);
}

Var Disentangler::reconstruction_loss(Tape& tape, const DisentangledSet& set, Var pooled,
                                      Modality m) const {
  Var decoded = decode(tape, set, m);
  if (!pooled.value().same_shape(decoded.value())) {
    throw DimensionError("reconstruct: pooled " + pooled.value().shape_string() + " vs decoded " +
                         decoded.value().shape_string());
  }
  return ops::sum(ops::abs(ops::sub(pooled, decoded)));
}

Var cmd_loss(Var a, Var b, int order) {
  if (a.rows() < 2) throw ConfigError("cmd_loss: batch size must be >= 2");
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("cmd_loss: " + a.value().shape_string() + " vs " +
                         b.value().shape_string());
  }
  if (order < 1) throw ConfigError("cmd_loss: order must be >= 1");
  Var mean_a = ops::mean_rows(a);
  Var mean_b = ops::mean_rows(b);
  Var total = ops::l2_norm(ops::sub(mean_a, mean_b));
  Var centered_a = ops::sub_row(a, mean_a);
  Var centered_b = ops::sub_row(b, mean_b);
  for (int k = 2; k <= order; ++k) {
    Var ca = ops::mean_rows(ops::powi(centered_a, k));
    Var cb = ops::mean_rows(ops::powi(centered_b, k));
    total = ops::add(total, ops::l2_norm(ops::sub(ca, cb)));
  }
  return total;
}

Var squared_cosine(Var a, Var b) {
  if (!a.value().same_shape(b.value())) {
    throw DimensionError("squared_cosine: " + a.value().shape_string() + " vs " +
                         b.value().shape_string());
  }
  Var dot = ops::sum(ops::mul(a, b));
  Var denom = ops::clamp_min(ops::mul(ops::l2_norm(a), ops::l2_norm(b)), kCosineEpsilon);
  return ops::square(ops::div(dot, denom));
}

Var orth_loss(const DisentangledSet& set) {
  return ops::add(ops::add(squared_cosine(set.shared_v, set.private_v),
                           squared_cosine(set.shared_a, set.private_a)),
                  squared_cosine(set.private_v, set.private_a));
}

}  // namespace evident::disentangle
