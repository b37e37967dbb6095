#include "evident/evidential.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "evident/errors.hpp"

namespace evident::evidential {
namespace {

double softplus(double x) { return x > 20.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void require_finite(double v, const char* what, const NIGParams& p, double y) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << what << " is not finite (" << v << ") for " << p.to_string() << ", y=" << y;
    throw NumericalError(os.str());
  }
}

}  // namespace

void NIGParams::validate() const {
  if (!(std::isfinite(delta) && std::isfinite(gamma) && std::isfinite(alpha) &&
        std::isfinite(beta)) ||
      !(gamma > 0.0) || !(alpha > 1.0) || !(beta > 0.0)) {
    throw NumericalError("invalid NIG parameters: " + to_string());
  }
}

std::string NIGParams::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << "NIG(delta=" << delta << ", gamma=" << gamma << ", alpha=" << alpha << ", beta=" << beta
     << ")";
  return os.str();
}

NIGParams activate(std::span<const double, 4> raw) {
  return NIGParams{raw[0], softplus(raw[1]) + kEvidenceEpsilon,
                   softplus(raw[2]) + 1.0 + kEvidenceEpsilon, softplus(raw[3]) + kEvidenceEpsilon};
}

Uncertainty uncertainties(const NIGParams& p) {
  p.validate();
  const double au = p.beta / (p.alpha - 1.0);
  return Uncertainty{au, au / p.gamma};
}

double nll_loss(const NIGParams& p, double y) {
  p.validate();
  const double omega = 2.0 * p.beta * (1.0 + p.gamma);
  const double r = y - p.delta;
  const double c = std::lgamma(p.alpha) - std::lgamma(p.alpha + 0.5);
  const double loss = 0.5 * std::log(std::numbers::pi / p.gamma) - p.alpha * std::log(omega) + c +
                      (p.alpha + 0.5) * std::log(p.gamma * r * r + omega);
  require_finite(loss, "nll_loss", p, y);
  return loss;
}

double reg_loss(const NIGParams& p, double y) {
  return std::abs(y - p.delta) * (2.0 * p.gamma + p.alpha);
}

double edl_loss(const NIGParams& p, double y, double lambda_r) {
  if (lambda_r < 0.0) throw ConfigError("edl_loss: lambda_r must be >= 0");
  return nll_loss(p, y) + lambda_r * reg_loss(p, y);
}

double evidence_weight(const NIGParams& p) { return p.gamma + 2.0 * p.alpha; }

NIGParams fuse(std::span<const NIGParams> branches) {
  if (branches.empty()) throw ConfigError("fuse: at least one branch is required");
  double wsum = 0.0, wdelta = 0.0, gamma = 0.0, alpha = 0.0, beta = 0.0;
  for (const auto& b : branches) {
    b.validate();
    const double w = evidence_weight(b);
    wsum += w;
    wdelta += w * b.delta;
    gamma += b.gamma;
    alpha += b.alpha;
    beta += b.beta;
  }
  const double delta = wdelta / wsum;
  double dispersion = 0.0;
  for (const auto& b : branches) dispersion += b.gamma * (b.delta - delta) * (b.delta - delta);
  const double k = static_cast<double>(branches.size());
  return NIGParams{delta, gamma, alpha + (k - 1.0) / 2.0, beta + 0.5 * dispersion};
}

BranchEvidence fuse_branches(const NIGParams& shared, const NIGParams& private_v,
                             const NIGParams& private_a) {
  const NIGParams all[] = {shared, private_v, private_a};
  BranchEvidence e{shared, private_v, private_a, fuse(all), {}};
  for (std::size_t k = 0; k < 3; ++k) e.weights[k] = evidence_weight(all[k]);
  return e;
}

double student_t_cdf(double t, double nu) {
  if (!(nu > 0.0)) throw ConfigError("student_t_cdf: nu must be > 0");
  if (t == 0.0) return 0.5;
  const double t2 = t * t;
  if (t2 < nu) {
    // Near the centre use the complementary argument to keep precision.
    const double central = 0.5 * boost::math::ibeta(0.5, nu / 2.0, t2 / (nu + t2));
    return t > 0.0 ? 0.5 + central : 0.5 - central;
  }
  const double tail = 0.5 * boost::math::ibeta(nu / 2.0, 0.5, nu / (nu + t2));
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double nu) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("student_t_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -student_t_quantile(1.0 - p, nu);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, nu) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("student_t_quantile: bracket diverged");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-14 * (1.0 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, nu) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double predictive_dof(const NIGParams& p) { return 2.0 * p.alpha; }

double predictive_scale(const NIGParams& p) {
  return std::sqrt(p.beta * (1.0 + p.gamma) / (p.gamma * p.alpha));
}

std::pair<double, double> predictive_interval(const NIGParams& p, double coverage) {
  if (!(coverage > 0.0 && coverage < 1.0)) {
    throw ConfigError("predictive_interval: coverage must lie in (0, 1)");
  }
  p.validate();
  const double half = student_t_quantile(0.5 * (1.0 + coverage), predictive_dof(p)) *
                      predictive_scale(p);
  return {p.delta - half, p.delta + half};
}

UncertaintyReport make_report(const NIGParams& p, double coverage) {
  const auto u = uncertainties(p);
  const auto [lo, hi] = predictive_interval(p, coverage);
  return UncertaintyReport{p.delta, u.aleatoric, u.epistemic, lo, hi, coverage};
}

NIGParams NigVar::value() const {
  return NIGParams{delta.item(), gamma.item(), alpha.item(), beta.item()};
}

NigVar activate(Var raw) {
  if (raw.rows() != 1 || raw.cols() != 4) {
    throw DimensionError("NIG activation expects 1x4, got " + raw.value().shape_string());
  }
  return NigVar{
      ops::slice_cols(raw, 0, 1),
      ops::add_scalar(ops::softplus(ops::slice_cols(raw, 1, 1)), kEvidenceEpsilon),
      ops::add_scalar(ops::softplus(ops::slice_cols(raw, 2, 1)), 1.0 + kEvidenceEpsilon),
      ops::add_scalar(ops::softplus(ops::slice_cols(raw, 3, 1)), kEvidenceEpsilon),
  };
}

NigHead::NigHead(ParameterSet& ps, const std::string& name, std::size_t in_dim, Rng& rng)
    : proj_(Linear::create(ps, name, in_dim, 4, rng)) {
  const double unit = std::log(std::numbers::e - 1.0);  // softplus(unit) == 1
  Matrix& b = proj_.bias->value;
  b[1] = unit;
  b[2] = unit;
  b[3] = unit;
}

Var nll_loss(const NigVar& p, double y) {
  Tape& tape = *p.delta.tape;
  Var omega = ops::scale(ops::mul(p.beta, ops::add_scalar(p.gamma, 1.0)), 2.0);
  Var r = ops::sub(tape.constant(y), p.delta);
  Var log_pi_over_gamma = ops::scale(ops::add_scalar(ops::scale(ops::log(p.gamma), -1.0),
                                                     std::log(std::numbers::pi)),
                                     0.5);
  Var c = ops::sub(ops::lgamma(p.alpha), ops::lgamma(ops::add_scalar(p.alpha, 0.5)));
  Var tail = ops::mul(ops::add_scalar(p.alpha, 0.5),
                      ops::log(ops::add(ops::mul(p.gamma, ops::square(r)), omega)));
  Var loss = ops::add(ops::add(ops::sub(log_pi_over_gamma, ops::mul(p.alpha, ops::log(omega))), c),
                      tail);
  require_finite(loss.item(), "nll_loss", p.value(), y);
  return loss;
}

Var reg_loss(const NigVar& p, double y) {
  Tape& tape = *p.delta.tape;
  Var err = ops::abs(ops::sub(tape.constant(y), p.delta));
  return ops::mul(err, ops::add(ops::scale(p.gamma, 2.0), p.alpha));
}

Var edl_loss(const NigVar& p, double y, double lambda_r) {
  if (lambda_r < 0.0) throw ConfigError("edl_loss: lambda_r must be >= 0");
  Var nll = nll_loss(p, y);
  if (lambda_r == 0.0) return nll;
  return ops::add(nll, ops::scale(reg_loss(p, y), lambda_r));
}

NigVar fuse(std::span<const NigVar> branches) {
  if (branches.empty()) throw ConfigError("fuse: at least one branch is required");
  if (branches.size() == 1) return branches[0];
  std::vector<Var> weights, weighted, gammas, alphas, betas;
  for (const auto& b : branches) {
    Var w = ops::add(b.gamma, ops::scale(b.alpha, 2.0));
    weights.push_back(w);
    weighted.push_back(ops::mul(w, b.delta));
    gammas.push_back(b.gamma);
    alphas.push_back(b.alpha);
    betas.push_back(b.beta);
  }
  auto total = [](const std::vector<Var>& v) { return ops::sum(ops::concat_cols(v)); };
  NigVar f;
  f.delta = ops::div(total(weighted), total(weights));
  f.gamma = total(gammas);
  f.alpha = ops::add_scalar(total(alphas), (static_cast<double>(branches.size()) - 1.0) / 2.0);
  std::vector<Var> dispersion;
  for (const auto& b : branches) {
    dispersion.push_back(ops::mul(b.gamma, ops::square(ops::sub(b.delta, f.delta))));
  }
  f.beta = ops::add(total(betas), ops::scale(total(dispersion), 0.5));
  return f;
}

NigVar average(std::span<const NigVar> branches) {
  if (branches.empty()) throw ConfigError("average: at least one branch is required");
  const double inv = 1.0 / static_cast<double>(branches.size());
  auto mean_of = [&](Var NigVar::*field) {
    std::vector<Var> parts;
    for (const auto& b : branches) parts.push_back(b.*field);
    return ops::scale(ops::sum(ops::concat_cols(parts)), inv);
  };
  return NigVar{mean_of(&NigVar::delta), mean_of(&NigVar::gamma), mean_of(&NigVar::alpha),
                mean_of(&NigVar::beta)};
}

}  // namespace evident::evidential
