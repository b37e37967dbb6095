#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evident/config.hpp"
#include "evident/metrics.hpp"
#include "evident/model.hpp"
#include "evident/synthdata.hpp"

// End-to-end helpers shared by the command line and the acceptance harness.
namespace evident::experiment {

// One record per sample, in dataset order.
std::vector<metrics::PredictionRecord> evaluate(const Model& model, const synth::Dataset& data,
                                                double coverage);

// Constant predictor at the training-target mean.
double mean_baseline_mae(const synth::Dataset& train, const synth::Dataset& test);

// Accepts "start:stop:step" (inclusive stop, rounded to 1e-9) or a comma list.
std::vector<double> parse_rates(const std::string& spec);

struct CorruptionRow {
  double rate = 0.0;
  double mae = 0.0;
  double mean_au = 0.0;
  double mean_eu = 0.0;
  std::optional<double> baseline_mae;
};

// Every rate masks the same dataset with the same seed; rates are evaluated on
// up to `threads` workers.
std::vector<CorruptionRow> corruption_sweep(const Model& model, const Model* baseline,
                                            const synth::Dataset& data,
                                            const std::vector<double>& rates, double coverage,
                                            std::uint64_t seed, std::size_t threads);

void write_corruption_csv(const std::vector<CorruptionRow>& rows, std::ostream& os);

struct RunResult {
  std::vector<metrics::PredictionRecord> records;
  metrics::CalibrationSummary summary;
  double baseline_mae = 0.0;
  double train_seconds = 0.0;
  std::size_t parameter_count = 0;
};

// Trains a fresh model on `split.train` and evaluates it on `split.test`.
RunResult train_and_evaluate(const RunConfig& cfg, const synth::Split& split,
                             std::unique_ptr<Model>* trained = nullptr);

struct AblationRow {
  std::string name;
  std::size_t parameters = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double picp = 0.0;
  double mpiw = 0.0;
  double mean_au = 0.0;
  double mean_eu = 0.0;
  double spearman = 0.0;
  double ause = 0.0;
  double seconds = 0.0;  // training wall time, not written to the CSV row
};

AblationRow run_ablation(const RunConfig& base, const std::string& preset, const synth::Split& split);
void write_ablation_header(std::ostream& os);
void write_ablation_row(const AblationRow& row, std::ostream& os);

// Worker count from EVIDENT_THREADS, else the hardware concurrency (at least 1).
std::size_t thread_budget();

}  // namespace evident::experiment
