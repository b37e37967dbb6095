#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

// Point-error, interval and uncertainty-ranking metrics over prediction sets.
namespace evident::metrics {

struct PredictionRecord {
  std::string id;
  double y = 0.0;      // ground truth
  double score = 0.0;  // prediction
  double au = 0.0;
  double eu = 0.0;
  double low = 0.0;
  double high = 0.0;

  double abs_error() const;
};

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

struct CoverageMetrics {
  double picp = 0.0;  // fraction of y inside [low, high], endpoints inclusive
  double mpiw = 0.0;  // mean interval width
};

struct QuantileBin {
  double eu_low = 0.0;   // smallest EU in the bin
  double eu_high = 0.0;  // largest EU in the bin
  std::size_t count = 0;
  double mae = 0.0;
  double ci_low = 0.0;   // percentile bootstrap interval of the bin MAE
  double ci_high = 0.0;
};

struct SparsificationCurves {
  std::vector<double> fractions;  // 0, 1/n, ..., (n-1)/n
  std::vector<double> model;      // reject highest EU first
  std::vector<double> oracle;     // reject highest |error| first
  std::vector<double> random;     // expectation under random rejection
  double ause = 0.0;              // trapezoid area of `model`, divided by model[0]
  double oracle_area = 0.0;       // same normalization for `oracle`
};

// All throw ConfigError on empty input.
ErrorMetrics error_metrics(std::span<const PredictionRecord> records);
CoverageMetrics coverage_metrics(std::span<const PredictionRecord> records);

// Sorts by EU (ties keep input order), splits into equal-count bins with the
// remainder going to the earliest bins, and bootstraps each bin's MAE.
std::vector<QuantileBin> quantile_binned_error(std::span<const PredictionRecord> records,
                                               std::size_t n_bins, std::size_t n_bootstrap,
                                               double confidence, std::uint64_t seed);

// Retained-set MAE after rejecting floor(f N) samples, for f = k / n_steps.
SparsificationCurves sparsification(std::span<const PredictionRecord> records,
                                    std::size_t n_steps);

// Rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

struct SummaryOptions {
  std::size_t n_bins = 4;
  std::size_t n_bootstrap = 1000;
  double confidence = 0.9;
  std::uint64_t seed = 7;
  std::size_t n_steps = 10;
};

struct CalibrationSummary {
  std::size_t n = 0;
  ErrorMetrics errors;
  CoverageMetrics coverage;
  double mean_au = 0.0;
  double mean_eu = 0.0;
  double spearman_eu_error = 0.0;
  std::vector<QuantileBin> quantile_bins;
  SparsificationCurves sparsification;
};

CalibrationSummary summarize(std::span<const PredictionRecord> records, const SummaryOptions& opt);

// CSV with header id,y,score,au,eu,low,high.
void write_records(std::span<const PredictionRecord> records, std::ostream& os);
std::vector<PredictionRecord> read_records(std::istream& is);

void write_summary_json(const CalibrationSummary& s, std::ostream& os);
// Two-column curve file: fraction,retained_mae.
void write_curve(std::span<const double> x, std::span<const double> y, const std::string& x_name,
                 const std::string& y_name, std::ostream& os);
void write_bins(const std::vector<QuantileBin>& bins, std::ostream& os);

}  // namespace evident::metrics
