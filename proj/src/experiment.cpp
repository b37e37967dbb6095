#include "evident/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <ostream>
#include <sstream>
#include <thread>

#include "evident/errors.hpp"
#include "evident/training.hpp"

namespace evident::experiment {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("rates: cannot parse '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("rates: cannot parse '" + s + "'");
  return v;
}

double mean_of(const std::vector<metrics::PredictionRecord>& r, double metrics::PredictionRecord::*f) {
  double s = 0.0;
  for (const auto& x : r) s += x.*f;
  return s / static_cast<double>(r.size());
}

}  // namespace

std::vector<metrics::PredictionRecord> evaluate(const Model& model, const synth::Dataset& data,
                                                double coverage) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  const auto& mc = model.config();
  std::vector<metrics::PredictionRecord> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    if (s.visual.cols() != mc.visual_dim || s.audio.cols() != mc.audio_dim) {
      throw DimensionError("sample " + s.id + " has feature dims (" +
                           std::to_string(s.visual.cols()) + ", " + std::to_string(s.audio.cols()) +
                           ") but the model expects (" + std::to_string(mc.visual_dim) + ", " +
                           std::to_string(mc.audio_dim) + ")");
    }
    const auto r = model.predict(s.visual, s.audio, coverage);
    out.push_back({s.id, s.score, r.score, r.au, r.eu, r.interval_low, r.interval_high});
  }
  return out;
}

double mean_baseline_mae(const synth::Dataset& train, const synth::Dataset& test) {
  if (train.empty() || test.empty()) throw ConfigError("baseline: empty split");
  double mean = 0.0;
  for (const auto& s : train) mean += s.score;
  mean /= static_cast<double>(train.size());
  double mae = 0.0;
  for (const auto& s : test) mae += std::abs(s.score - mean);
  return mae / static_cast<double>(test.size());
}

std::vector<double> parse_rates(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(parse_double(tok));
    if (parts.size() != 3) throw ConfigError("rates: expected start:stop:step, got '" + spec + "'");
    const double start = parts[0], stop = parts[1], step = parts[2];
    if (!(step > 0.0) || stop < start) throw ConfigError("rates: empty or invalid range '" + spec + "'");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
      out.push_back(std::round((start + static_cast<double>(k) * step) * 1e9) / 1e9);
    }
  } else {
    std::stringstream ss(spec);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_double(tok));
  }
  if (out.empty()) throw ConfigError("rates: no values in '" + spec + "'");
  for (double r : out) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("rates: " + fmt(r) + " is outside [0, 1)");
  }
  return out;
}

std::vector<CorruptionRow> corruption_sweep(const Model& model, const Model* baseline,
                                            const synth::Dataset& data,
                                            const std::vector<double>& rates, double coverage,
                                            std::uint64_t seed, std::size_t threads) {
  for (double r : rates) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("corruption rate " + fmt(r) + " is outside [0, 1)");
  }
  std::vector<CorruptionRow> rows(rates.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < rates.size() && !failed; i = next++) {
      try {
        const synth::Dataset masked = synth::corrupt(data, rates[i], seed);
        const auto rec = evaluate(model, masked, coverage);
        CorruptionRow row;
        row.rate = rates[i];
        row.mae = metrics::error_metrics(rec).mae;
        row.mean_au = mean_of(rec, &metrics::PredictionRecord::au);
        row.mean_eu = mean_of(rec, &metrics::PredictionRecord::eu);
        if (baseline) row.baseline_mae = metrics::error_metrics(evaluate(*baseline, masked, coverage)).mae;
        rows[i] = row;
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(threads, rates.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

void write_corruption_csv(const std::vector<CorruptionRow>& rows, std::ostream& os) {
  const bool with_baseline = !rows.empty() && rows.front().baseline_mae.has_value();
  os << "rate,mae,mean_au,mean_eu" << (with_baseline ? ",baseline_mae" : "") << '\n';
  for (const auto& r : rows) {
    os << fmt(r.rate) << ',' << fmt(r.mae) << ',' << fmt(r.mean_au) << ',' << fmt(r.mean_eu);
    if (with_baseline) os << ',' << fmt(r.baseline_mae.value_or(NAN));
    os << '\n';
  }
}

RunResult train_and_evaluate(const RunConfig& cfg_in, const synth::Split& split,
                             std::unique_ptr<Model>* trained) {
  if (split.train.empty()) throw ConfigError("train split is empty");
  if (split.test.empty()) throw ConfigError("test split is empty");
  RunConfig cfg = cfg_in;
  cfg.model.visual_dim = split.train.front().visual.cols();
  cfg.model.audio_dim = split.train.front().audio.cols();
  cfg.validate();

  auto model = std::make_unique<Model>(cfg.model, cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  train(*model, split.train, cfg.train, cfg.weights);
  const auto t1 = std::chrono::steady_clock::now();

  RunResult r;
  r.train_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.parameter_count = model->params().scalar_count();
  r.records = evaluate(*model, split.test, cfg.coverage);
  metrics::SummaryOptions opt;
  opt.seed = cfg.seed;
  r.summary = metrics::summarize(r.records, opt);
  r.baseline_mae = mean_baseline_mae(split.train, split.test);
  if (trained) *trained = std::move(model);
  return r;
}

AblationRow run_ablation(const RunConfig& base, const std::string& preset,
                         const synth::Split& split) {
  RunConfig cfg = base;
  cfg.model.flags = AblationFlags::from_name(preset);
  const RunResult r = train_and_evaluate(cfg, split);
  AblationRow row;
  row.name = preset;
  row.parameters = r.parameter_count;
  row.mae = r.summary.errors.mae;
  row.rmse = r.summary.errors.rmse;
  row.picp = r.summary.coverage.picp;
  row.mpiw = r.summary.coverage.mpiw;
  row.mean_au = r.summary.mean_au;
  row.mean_eu = r.summary.mean_eu;
  row.spearman = r.summary.spearman_eu_error;
  row.ause = r.summary.sparsification.ause;
  row.seconds = r.train_seconds;
  return row;
}

void write_ablation_header(std::ostream& os) {
  os << "ablation,parameters,mae,rmse,picp,mpiw,mean_au,mean_eu,spearman_eu_abs_error,ause\n";
}

void write_ablation_row(const AblationRow& r, std::ostream& os) {
  os << r.name << ',' << r.parameters << ',' << fmt(r.mae) << ',' << fmt(r.rmse) << ','
     << fmt(r.picp) << ',' << fmt(r.mpiw) << ',' << fmt(r.mean_au) << ',' << fmt(r.mean_eu) << ','
     << fmt(r.spearman) << ',' << fmt(r.ause) << '\n';
}

std::size_t thread_budget() {
  if (const char* env = std::getenv("EVIDENT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError(std::string("EVIDENT_THREADS must be a positive integer, got '") + env + "'");
    }
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace evident::experiment
