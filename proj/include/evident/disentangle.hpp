#pragma once

#include <cstddef>
#include <string>

#include "evident/layers.hpp"

// Shared/private projection of pooled modality features and the structural
// losses that keep the two subspaces aligned, decorrelated, and informative.
namespace evident::disentangle {

enum class Modality { Visual, Audio };

struct DisentangledSet {
  Var shared_v;      // 1 x D
  Var shared_a;      // 1 x D
  Var private_v;     // 1 x D
  Var private_a;     // 1 x D
  Var shared_joint;  // 1 x 2D, [shared_v ; shared_a]
};

// Denominator guard for cosine similarity.
inline constexpr double kCosineEpsilon = 1e-8;

class Disentangler {
 public:
  Disentangler() = default;
  Disentangler(ParameterSet& ps, const std::string& name, std::size_t dim, Rng& rng);

  std::size_t dim() const { return dim_; }
  DisentangledSet project(Tape& tape, Var pooled_v, Var pooled_a) const;

  // Decoded 1 x D estimate of the pooled feature from LayerNorm([shared ; private]).
  Var decode(Tape& tape, const DisentangledSet& set, Modality m) const;
  // L1 distance between the pooled feature and its reconstruction.
  Var reconstruction_loss(Tape& tape, const DisentangledSet& set, Var pooled, Modality m) const;

  // Shared projector, tied across modalities.
  const Mlp& shared_projector() const { return shared_; }
  const Mlp& decoder(Modality m) const { return m == Modality::Visual ? decoder_v_ : decoder_a_; }

 private:
  std::size_t dim_ = 0;
  Mlp shared_;
  Mlp private_v_;
  Mlp private_a_;
  LayerNorm norm_v_;
  LayerNorm norm_a_;
  Mlp decoder_v_;
  Mlp decoder_a_;
};

// Central moment discrepancy between two B x D batches:
// ||E[a] - E[b]|| + sum_{k=2..order} ||c_k(a) - c_k(b)||, Euclidean norms.
Var cmd_loss(Var a, Var b, int order);

// Squared cosine similarity of two row vectors, denominator max(|a||b|, eps).
Var squared_cosine(Var a, Var b);

// Sum of squared cosines over (shared_v, private_v), (shared_a, private_a),
// (private_v, private_a). Lies in [0, 3].
Var orth_loss(const DisentangledSet& set);

}  // namespace evident::disentangle
