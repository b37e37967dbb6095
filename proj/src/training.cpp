#include "evident/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "evident/config.hpp"

namespace evident {
namespace {

Var batch_mean(const std::vector<Var>& terms) {
  return ops::scale(ops::sum(ops::concat_cols(terms)), 1.0 / static_cast<double>(terms.size()));
}

void add_scaled(LossBreakdown& acc, const LossBreakdown& b, double s) {
  acc.struct_total += s * b.struct_total;
  acc.dis += s * b.dis;
  acc.aln += s * b.aln;
  acc.rec += s * b.rec;
  acc.evid_fused += s * b.evid_fused;
  for (std::size_t k = 0; k < 3; ++k) acc.evid_aux[k] += s * b.evid_aux[k];
  acc.mse_guide += s * b.mse_guide;
  acc.eta_t += s * b.eta_t;
  acc.total += s * b.total;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr const char* kCheckpointMagic = "evident-checkpoint v1";

}  // namespace

void LossWeights::validate() const {
  for (double l : {lambda_aln, lambda_rec, lambda_orth, lambda_aux, lambda_r}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("loss weights must be finite and >= 0");
  }
  if (burn_in < 1) throw ConfigError("burn_in must be >= 1");
}

double LossBreakdown::identity_residual(double lambda_aux) const {
  const double aux = evid_aux[0] + evid_aux[1] + evid_aux[2];
  const double expected =
      struct_total + (1.0 - eta_t) * mse_guide + eta_t * (evid_fused + lambda_aux * aux);
  return std::abs(total - expected);
}

bool LossBreakdown::all_finite() const {
  bool ok = std::isfinite(struct_total) && std::isfinite(dis) && std::isfinite(aln) &&
            std::isfinite(rec) && std::isfinite(evid_fused) && std::isfinite(mse_guide) &&
            std::isfinite(eta_t) && std::isfinite(total);
  for (double a : evid_aux) ok = ok && std::isfinite(a);
  return ok;
}

std::string LossBreakdown::to_string() const {
  std::ostringstream os;
  os << "total=" << total << " struct=" << struct_total << " dis=" << dis << " aln=" << aln
     << " rec=" << rec << " evid_fused=" << evid_fused << " aux=(" << evid_aux[0] << ", "
     << evid_aux[1] << ", " << evid_aux[2] << ") mse=" << mse_guide << " eta=" << eta_t;
  return os.str();
}

double curriculum(std::size_t epoch, std::size_t burn_in) {
  if (burn_in < 1) throw ConfigError("curriculum: burn-in must be >= 1");
  return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(burn_in));
}

BatchLoss total_loss(Tape& tape, const Model& model,
                     std::span<const synth::LabeledSample* const> batch,
                     const LossWeights& weights, std::size_t epoch) {
  if (batch.empty()) throw ConfigError("total_loss: empty batch");
  const AblationFlags& f = model.config().flags;
  const double eta = curriculum(epoch, weights.burn_in);
  const double w_orth = f.orth ? weights.lambda_orth : 0.0;
  const double w_aln = f.aln ? weights.lambda_aln : 0.0;
  const double w_rec = f.rec ? weights.lambda_rec : 0.0;

  std::vector<Var> orth, rec, fused, mse, shared_v, shared_a;
  std::array<std::vector<Var>, 3> aux;
  for (const auto* s : batch) {
    const SampleOutput out = model.forward(tape, s->visual, s->audio);
    const double y = model.normalize(s->score);
    Var sq = ops::square(ops::sub(out.point, tape.constant(y)));
    mse.push_back(sq);
    if (out.set) {
      if (f.orth) orth.push_back(disentangle::orth_loss(*out.set));
      if (f.rec) {
        rec.push_back(ops::add(
            model.disentangler().reconstruction_loss(tape, *out.set, out.pooled_v,
                                                     disentangle::Modality::Visual),
            model.disentangler().reconstruction_loss(tape, *out.set, out.pooled_a,
                                                     disentangle::Modality::Audio)));
      }
      shared_v.push_back(out.set->shared_v);
      shared_a.push_back(out.set->shared_a);
    }
    if (!out.fused) {
      fused.push_back(sq);
      continue;
    }
    fused.push_back(evidential::edl_loss(*out.fused, y, weights.lambda_r));
    if (out.branches.size() > 1) {
      for (std::size_t k = 0; k < out.branches.size(); ++k) {
        const auto slot = static_cast<std::size_t>(out.branch_ids[k]);
        aux.at(slot).push_back(evidential::edl_loss(out.branches[k], y, weights.lambda_r));
      }
    }
  }

  LossBreakdown b;
  b.eta_t = eta;
  Var zero = tape.constant(0.0);
  Var orth_mean = orth.empty() ? zero : batch_mean(orth);
  Var rec_mean = rec.empty() ? zero : batch_mean(rec);
  Var aln = (f.aln && shared_v.size() >= 2)
                ? disentangle::cmd_loss(ops::concat_rows(shared_v), ops::concat_rows(shared_a),
                                        model.config().cmd_order)
                : zero;
  Var fused_mean = batch_mean(fused);
  Var mse_mean = batch_mean(mse);
  Var aux_sum = zero;
  for (std::size_t k = 0; k < 3; ++k) {
    if (aux[k].empty()) continue;
    Var m = batch_mean(aux[k]);
    b.evid_aux[k] = m.item();
    aux_sum = ops::add(aux_sum, m);
  }

  Var dis = ops::scale(orth_mean, w_orth);
  Var structural = ops::add(ops::add(dis, ops::scale(aln, w_aln)), ops::scale(rec_mean, w_rec));
  Var evid = ops::add(fused_mean, ops::scale(aux_sum, weights.lambda_aux));
  Var total =
      ops::add(structural, ops::add(ops::scale(mse_mean, 1.0 - eta), ops::scale(evid, eta)));

  b.dis = dis.item();
  b.aln = aln.item();
  b.rec = rec_mean.item();
  b.struct_total = structural.item();
  b.evid_fused = fused_mean.item();
  b.mse_guide = mse_mean.item();
  b.total = total.item();
  return BatchLoss{total, b};
}

Adam::Adam(const ParameterSet& params, AdamConfig cfg)
    : cfg_(cfg), m_(zero_gradients(params)), v_(zero_gradients(params)) {
  if (!(cfg.lr > 0.0) || !(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0) || !(cfg.eps > 0.0)) {
    throw ConfigError("adam: invalid hyperparameters");
  }
}

double Adam::step(ParameterSet& params, GradientSet& grads) {
  if (grads.size() != params.size()) throw DimensionError("adam: gradient count mismatch");
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) throw NumericalError("adam: non-finite gradient norm");
  const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = params[i].value;
    const Matrix& g = grads[i];
    if (g.empty()) continue;
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = clip * g[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      w[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
  return norm;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (oversample_factor < 1) throw ConfigError("train: oversample_factor must be >= 1");
  if (!(divergence_limit > 0.0)) throw ConfigError("train: divergence_limit must be > 0");
  if (!(augment_mask_max >= 0.0 && augment_mask_max < 1.0)) {
    throw ConfigError("train: augment_mask_max must lie in [0, 1)");
  }
}

TrainResult train(Model& model, const synth::Dataset& data, const TrainConfig& cfg,
                  const LossWeights& weights, const StepCallback& on_step) {
  cfg.validate();
  weights.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");

  double mean = 0.0;
  for (const auto& s : data) mean += s.score;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const auto& s : data) var += (s.score - mean) * (s.score - mean);
  const double sd = std::sqrt(var / static_cast<double>(data.size()));
  model.set_target_scaling(mean, sd > 1e-12 ? sd : 1.0);

  const synth::Dataset expanded =
      cfg.oversample ? synth::oversample(data, cfg.oversample_threshold, cfg.oversample_factor)
                     : data;
  std::vector<std::size_t> order(expanded.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedf00dULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Adam adam(model.params(), cfg.adam);

  TrainResult result;
  LossBreakdown last_finite;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const synth::LabeledSample*> batch;
      std::vector<synth::LabeledSample> masked;
      masked.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        if (cfg.augment_mask_max > 0.0) {
          const double rate = cfg.augment_mask_max * unit(rng);
          masked.push_back(synth::corrupt(expanded[order[i]], rate, rng()));
          batch.push_back(&masked.back());
        } else {
          batch.push_back(&expanded[order[i]]);
        }
      }

      Tape tape;
      BatchLoss loss;
      try {
        loss = total_loss(tape, model, batch, weights, epoch);
      } catch (const NumericalError& e) {
        throw DivergenceError(std::string("training diverged at epoch ") + std::to_string(epoch) +
                                  ": " + e.what(),
                              last_finite, LossBreakdown{});
      }
      if (!loss.breakdown.all_finite() || loss.breakdown.total > cfg.divergence_limit) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                  loss.breakdown.to_string(),
                              last_finite, loss.breakdown);
      }
      last_finite = loss.breakdown;
      tape.backward(loss.total);
      GradientSet grads = zero_gradients(model.params());
      tape.accumulate_param_grads(grads);
      log.grad_norm += adam.step(model.params(), grads);
      add_scaled(log.mean, loss.breakdown, 1.0);
      if (on_step) on_step(epoch, steps, loss.breakdown);
      ++steps;
    }
    const double inv = 1.0 / static_cast<double>(steps);
    LossBreakdown scaled;
    add_scaled(scaled, log.mean, inv);
    log.mean = scaled;
    log.grad_norm *= inv;
    result.epochs.push_back(log);
  }
  return result;
}

void write_epoch_log(const std::vector<EpochLog>& log, std::ostream& os) {
  os << "epoch,total,struct_total,dis,aln,rec,evid_fused,evid_aux_shared,evid_aux_private_v,"
        "evid_aux_private_a,mse_guide,eta_t,grad_norm\n";
  for (const auto& e : log) {
    const auto& b = e.mean;
    os << e.epoch;
    for (double v : {b.total, b.struct_total, b.dis, b.aln, b.rec, b.evid_fused, b.evid_aux[0],
                     b.evid_aux[1], b.evid_aux[2], b.mse_guide, b.eta_t, e.grad_norm}) {
      os << ',' << fmt(v);
    }
    os << '\n';
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot write checkpoint " + file.string());
  os << kCheckpointMagic << '\n';
  write_key_values(model_key_values(model.config()), os);
  os << "target_mean = " << fmt(model.target_mean()) << '\n';
  os << "target_scale = " << fmt(model.target_scale()) << '\n';
  os << "params " << model.params().size() << '\n';
  for (const auto& p : model.params()) {
    os << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      for (std::size_t c = 0; c < p.value.cols(); ++c) {
        os << (c ? " " : "") << fmt(p.value(r, c));
      }
      os << '\n';
    }
  }
  if (!os) throw ConfigError("failed writing checkpoint " + file.string());
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open checkpoint " + file.string());
  std::string line;
  std::getline(is, line);
  if (line != kCheckpointMagic) throw ConfigError("not a checkpoint: " + file.string());

  ModelConfig cfg;
  double mean = 0.0, scale = 1.0;
  std::size_t count = 0;
  while (std::getline(is, line)) {
    if (line.rfind("params ", 0) == 0) {
      count = std::stoul(line.substr(7));
      break;
    }
    std::istringstream ls(line);
    const KeyValues kv = parse_key_values(ls);
    for (const auto& [k, v] : kv) {
      if (k == "target_mean") {
        mean = std::stod(v);
      } else if (k == "target_scale") {
        scale = std::stod(v);
      } else {
        apply_model_setting(cfg, k, v);
      }
    }
  }
  auto model = std::make_unique<Model>(cfg, 0);
  model->set_target_scaling(mean, scale);
  if (count != model->params().size()) {
    throw ConfigError("checkpoint has " + std::to_string(count) + " parameters, model expects " +
                      std::to_string(model->params().size()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(is >> tag >> name >> rows >> cols) || tag != "param") {
      throw ConfigError("malformed parameter header in checkpoint");
    }
    Parameter* p = model->params().find(name);
    if (p == nullptr) throw ConfigError("checkpoint parameter not in model: " + name);
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw DimensionError("checkpoint parameter " + name + " has shape " + std::to_string(rows) +
                           "x" + std::to_string(cols) + ", model expects " +
                           p->value.shape_string());
    }
    for (double& v : p->value.data()) {
      if (!(is >> v)) throw ConfigError("truncated values for parameter " + name);
    }
  }
  return model;
}

}  // namespace evident
