#include "evident/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "evident/errors.hpp"

namespace evident::metrics {
namespace {

void require_nonempty(std::span<const PredictionRecord> r, const char* what) {
  if (r.empty()) throw ConfigError(std::string(what) + ": no records");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Indices ordered by descending key; equal keys keep input order.
std::vector<std::size_t> descending(const std::vector<double>& key) {
  std::vector<std::size_t> idx(key.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  return idx;
}

// Retained MAE after dropping the first `reject` entries of `order`.
double retained_mae(const std::vector<double>& err, const std::vector<std::size_t>& order,
                    std::size_t reject) {
  double s = 0.0;
  for (std::size_t i = reject; i < order.size(); ++i) s += err[order[i]];
  return s / static_cast<double>(order.size() - reject);
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double a = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) a += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
  return a;
}

// Linear interpolation between order statistics.
double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double PredictionRecord::abs_error() const { return std::abs(y - score); }

ErrorMetrics error_metrics(std::span<const PredictionRecord> records) {
  require_nonempty(records, "error_metrics");
  double a = 0.0, s = 0.0;
  for (const auto& r : records) {
    a += r.abs_error();
    s += (r.y - r.score) * (r.y - r.score);
  }
  const auto n = static_cast<double>(records.size());
  return ErrorMetrics{a / n, std::sqrt(s / n)};
}

CoverageMetrics coverage_metrics(std::span<const PredictionRecord> records) {
  require_nonempty(records, "coverage_metrics");
  double covered = 0.0, width = 0.0;
  for (const auto& r : records) {
    if (r.low > r.high) throw ConfigError("coverage_metrics: interval low > high for " + r.id);
    covered += (r.y >= r.low && r.y <= r.high) ? 1.0 : 0.0;
    width += r.high - r.low;
  }
  const auto n = static_cast<double>(records.size());
  return CoverageMetrics{covered / n, width / n};
}

std::vector<QuantileBin> quantile_binned_error(std::span<const PredictionRecord> records,
                                               std::size_t n_bins, std::size_t n_bootstrap,
                                               double confidence, std::uint64_t seed) {
  if (n_bins < 1) throw ConfigError("quantile_binned_error: n_bins must be >= 1");
  if (records.size() < n_bins) {
    throw ConfigError("quantile_binned_error: fewer records than bins");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("quantile_binned_error: confidence must lie in (0, 1)");
  }
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return records[a].eu < records[b].eu; });

  const std::size_t base = records.size() / n_bins, extra = records.size() % n_bins;
  std::vector<QuantileBin> bins;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t count = base + (b < extra ? 1 : 0);
    std::vector<double> err;
    for (std::size_t i = pos; i < pos + count; ++i) err.push_back(records[idx[i]].abs_error());
    QuantileBin bin;
    bin.count = count;
    bin.eu_low = records[idx[pos]].eu;
    bin.eu_high = records[idx[pos + count - 1]].eu;
    bin.mae = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(count);
    bin.ci_low = bin.ci_high = bin.mae;
    if (n_bootstrap > 0) {
      std::mt19937_64 rng(seed + b);
      std::uniform_int_distribution<std::size_t> pick(0, count - 1);
      std::vector<double> means(n_bootstrap);
      for (auto& m : means) {
        double s = 0.0;
        for (std::size_t k = 0; k < count; ++k) s += err[pick(rng)];
        m = s / static_cast<double>(count);
      }
      bin.ci_low = percentile(means, 0.5 * (1.0 - confidence));
      bin.ci_high = percentile(means, 0.5 * (1.0 + confidence));
    }
    bins.push_back(bin);
    pos += count;
  }
  return bins;
}

SparsificationCurves sparsification(std::span<const PredictionRecord> records,
                                    std::size_t n_steps) {
  if (records.size() < 2) throw ConfigError("sparsification: at least two records are required");
  if (n_steps < 1) throw ConfigError("sparsification: n_steps must be >= 1");
  std::vector<double> err, eu;
  for (const auto& r : records) {
    err.push_back(r.abs_error());
    eu.push_back(r.eu);
  }
  const auto by_eu = descending(eu);
  const auto by_err = descending(err);
  const auto n = static_cast<double>(records.size());
  SparsificationCurves c;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double f = static_cast<double>(k) / static_cast<double>(n_steps);
    const auto reject = static_cast<std::size_t>(std::floor(f * n));
    c.fractions.push_back(f);
    c.model.push_back(retained_mae(err, by_eu, reject));
    c.oracle.push_back(retained_mae(err, by_err, reject));
  }
  c.random.assign(n_steps, c.model.front());
  const double full = c.model.front();
  const double scale = full > 0.0 ? full : 1.0;
  c.ause = trapezoid(c.fractions, c.model) / scale;
  c.oracle_area = trapezoid(c.fractions, c.oracle) / scale;
  return c;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw ConfigError("spearman: need two equal-length samples of size >= 2");
  }
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

CalibrationSummary summarize(std::span<const PredictionRecord> records, const SummaryOptions& opt) {
  CalibrationSummary s;
  s.n = records.size();
  s.errors = error_metrics(records);
  s.coverage = coverage_metrics(records);
  std::vector<double> eu, err;
  for (const auto& r : records) {
    s.mean_au += r.au;
    s.mean_eu += r.eu;
    eu.push_back(r.eu);
    err.push_back(r.abs_error());
  }
  s.mean_au /= static_cast<double>(s.n);
  s.mean_eu /= static_cast<double>(s.n);
  if (s.n >= 2) {
    s.spearman_eu_error = spearman(eu, err);
    s.sparsification = sparsification(records, opt.n_steps);
  }
  if (s.n >= opt.n_bins) {
    s.quantile_bins =
        quantile_binned_error(records, opt.n_bins, opt.n_bootstrap, opt.confidence, opt.seed);
  }
  return s;
}

void write_records(std::span<const PredictionRecord> records, std::ostream& os) {
  os << "id,y,score,au,eu,low,high\n";
  for (const auto& r : records) {
    os << r.id;
    for (double v : {r.y, r.score, r.au, r.eu, r.low, r.high}) os << ',' << fmt(v);
    os << '\n';
  }
}

std::vector<PredictionRecord> read_records(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "id,y,score,au,eu,low,high") {
    throw ConfigError("records: unexpected header");
  }
  std::vector<PredictionRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    PredictionRecord r;
    std::string field;
    std::getline(row, r.id, ',');
    double* slots[] = {&r.y, &r.score, &r.au, &r.eu, &r.low, &r.high};
    for (double* s : slots) {
      if (!std::getline(row, field, ',')) throw ConfigError("records: short row for " + r.id);
      *s = std::stod(field);
    }
    out.push_back(r);
  }
  return out;
}

void write_summary_json(const CalibrationSummary& s, std::ostream& os) {
  nlohmann::ordered_json j;
  j["n"] = s.n;
  j["mae"] = s.errors.mae;
  j["rmse"] = s.errors.rmse;
  j["picp"] = s.coverage.picp;
  j["mpiw"] = s.coverage.mpiw;
  j["mean_au"] = s.mean_au;
  j["mean_eu"] = s.mean_eu;
  j["spearman_eu_abs_error"] = s.spearman_eu_error;
  j["ause"] = s.sparsification.ause;
  j["oracle_area"] = s.sparsification.oracle_area;
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : s.quantile_bins) {
    bins.push_back({{"eu_low", b.eu_low},
                    {"eu_high", b.eu_high},
                    {"count", b.count},
                    {"mae", b.mae},
                    {"ci_low", b.ci_low},
                    {"ci_high", b.ci_high}});
  }
  j["quantile_bins"] = bins;
  j["sparsification"] = {{"fractions", s.sparsification.fractions},
                         {"model", s.sparsification.model},
                         {"oracle", s.sparsification.oracle},
                         {"random", s.sparsification.random}};
  os << j.dump(2) << '\n';
}

void write_curve(std::span<const double> x, std::span<const double> y, const std::string& x_name,
                 const std::string& y_name, std::ostream& os) {
  if (x.size() != y.size()) throw DimensionError("write_curve: length mismatch");
  os << x_name << ',' << y_name << '\n';
  for (std::size_t i = 0; i < x.size(); ++i) os << fmt(x[i]) << ',' << fmt(y[i]) << '\n';
}

void write_bins(const std::vector<QuantileBin>& bins, std::ostream& os) {
  os << "bin,eu_low,eu_high,count,mae,ci_low,ci_high\n";
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const auto& b = bins[i];
    os << i << ',' << fmt(b.eu_low) << ',' << fmt(b.eu_high) << ',' << b.count << ','
       << fmt(b.mae) << ',' << fmt(b.ci_low) << ',' << fmt(b.ci_high) << '\n';
  }
}

}  // namespace evident::metrics
