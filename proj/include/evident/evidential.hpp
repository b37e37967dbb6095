#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>

#include "evident/layers.hpp"

// Normal-Inverse-Gamma evidence: heads, uncertainty decomposition, losses,
// evidence-weighted Bayesian fusion, and Student-t predictive intervals.
namespace evident::evidential {

// Added after softplus so gamma, beta > 0 and alpha > 1 strictly.
inline constexpr double kEvidenceEpsilon = 1e-6;

struct NIGParams {
  double delta = 0.0;  // predicted score
  double gamma = 1.0;  // virtual observation count, > 0
  double alpha = 2.0;  // shape, > 1
  double beta = 1.0;   // scale, > 0

  // Throws NumericalError when a domain constraint fails.
  void validate() const;
  std::string to_string() const;
};

struct Uncertainty {
  double aleatoric = 0.0;  // beta / (alpha - 1)
  double epistemic = 0.0;  // beta / (gamma (alpha - 1))
};

struct UncertaintyReport {
  double score = 0.0;
  double au = 0.0;
  double eu = 0.0;
  double interval_low = 0.0;
  double interval_high = 0.0;
  double coverage_level = 0.9;
};

// Three branch evidences plus their fusion.
struct BranchEvidence {
  NIGParams shared;
  NIGParams private_v;
  NIGParams private_a;
  NIGParams fused;
  std::array<double, 3> weights{};  // gamma_k + 2 alpha_k
};

// Maps a raw head output (v1..v4) to valid NIG parameters.
NIGParams activate(std::span<const double, 4> raw);

Uncertainty uncertainties(const NIGParams& p);

// Negative log of the Student-t posterior predictive, written in NIG terms.
double nll_loss(const NIGParams& p, double y);
// |y - delta| (2 gamma + alpha).
double reg_loss(const NIGParams& p, double y);
double edl_loss(const NIGParams& p, double y, double lambda_r);

// Evidence strength gamma + 2 alpha.
double evidence_weight(const NIGParams& p);
// Conjugate fusion of K >= 1 branches, evidence-weighted mean.
NIGParams fuse(std::span<const NIGParams> branches);
BranchEvidence fuse_branches(const NIGParams& shared, const NIGParams& private_v,
                             const NIGParams& private_a);

// Student-t CDF with nu degrees of freedom (standard location/scale).
double student_t_cdf(double t, double nu);
// Inverse CDF via bracketing plus bisection on student_t_cdf.
double student_t_quantile(double p, double nu);

// Degrees of freedom 2 alpha and scale sqrt(beta (1 + gamma) / (gamma alpha)).
double predictive_dof(const NIGParams& p);
double predictive_scale(const NIGParams& p);
// Central interval of the predictive Student-t holding `coverage` mass.
std::pair<double, double> predictive_interval(const NIGParams& p, double coverage);

UncertaintyReport make_report(const NIGParams& p, double coverage);

// ---- Tape versions -------------------------------------------------------

struct NigVar {
  Var delta;
  Var gamma;
  Var alpha;
  Var beta;

  NIGParams value() const;
};

// Applies the domain activations to a 1x4 raw node.
NigVar activate(Var raw);

// Linear projection to four raw values followed by the activations.
class NigHead {
 public:
  NigHead() = default;
  // Output bias starts at (0, c, c, c) with softplus(c) = 1, i.e. gamma ~ 1, alpha ~ 2, beta ~ 1.
  NigHead(ParameterSet& ps, const std::string& name, std::size_t in_dim, Rng& rng);

  std::size_t in_dim() const { return proj_.in_dim(); }
  Var raw(Tape& tape, Var z) const { return proj_.forward(tape, z); }
  NigVar forward(Tape& tape, Var z) const { return activate(raw(tape, z)); }

 private:
  Linear proj_;
};

Var nll_loss(const NigVar& p, double y);
Var reg_loss(const NigVar& p, double y);
Var edl_loss(const NigVar& p, double y, double lambda_r);

NigVar fuse(std::span<const NigVar> branches);
// Plain parameter-wise mean, used when Bayesian fusion is switched off.
NigVar average(std::span<const NigVar> branches);

}  // namespace evident::evidential
