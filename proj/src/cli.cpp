#include "evident/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "evident/config.hpp"
#include "evident/errors.hpp"
#include "evident/experiment.hpp"
#include "evident/metrics.hpp"
#include "evident/training.hpp"

#ifndef EVIDENT_GIT_DESCRIBE
#define EVIDENT_GIT_DESCRIBE "unknown"
#endif

namespace evident::cli {
namespace fs = std::filesystem;

const char* git_describe() { return EVIDENT_GIT_DESCRIBE; }

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Options shared by every command; empty strings mean "not given".
struct Common {
  std::string config;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string baseline_checkpoint;
  std::string split = "test";
  std::string ablate;
  std::string rates = "0.0:0.9:0.1";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  double coverage = 0.9;
  bool force = false;
};

class Run {
 public:
  Run(std::string command, const Common& opt, std::ostream& out)
      : command_(std::move(command)), opt_(opt), out_(out), started_(utc_now()) {}

  // Config file, then --set overrides, then dedicated flags.
  RunConfig config() const {
    RunConfig cfg = opt_.config.empty() ? RunConfig{} : load_run_config(opt_.config);
    for (const auto& s : opt_.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (opt_.seed) apply_setting(cfg, "seed", std::to_string(*opt_.seed));
    if (opt_.epochs) apply_setting(cfg, "epochs", std::to_string(*opt_.epochs));
    if (opt_.lr) apply_setting(cfg, "lr", fmt(*opt_.lr));
    if (opt_.batch_size) apply_setting(cfg, "batch_size", std::to_string(*opt_.batch_size));
    if (!opt_.ablate.empty() && opt_.ablate.find(',') == std::string::npos && opt_.ablate != "all") {
      apply_setting(cfg, "ablation", opt_.ablate);
    }
    cfg.coverage = opt_.coverage;
    cfg.validate();
    return cfg;
  }

  // Refuses a non-empty output directory unless --force.
  fs::path prepare_out() const {
    if (opt_.out.empty()) throw ConfigError(command_ + ": --out is required");
    const fs::path dir(opt_.out);
    if (fs::exists(dir) && !fs::is_directory(dir)) {
      throw ConfigError("output path exists and is not a directory: " + dir.string());
    }
    if (fs::exists(dir) && !fs::is_empty(dir) && !opt_.force) {
      throw ConfigError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    }
    fs::create_directories(dir);
    return dir;
  }

  void record(const std::string& key, nlohmann::ordered_json value) { extra_[key] = std::move(value); }

  void write_manifest(const fs::path& dir, std::uint64_t seed) const {
    nlohmann::ordered_json j;
    j["command"] = command_;
    j["config_path"] = opt_.config;
    j["seed"] = seed;
    j["git_describe"] = git_describe();
    j["output_dir"] = dir.string();
    j["started_at"] = started_;
    j["finished_at"] = utc_now();
    for (auto it = extra_.begin(); it != extra_.end(); ++it) j[it.key()] = it.value();
    std::ofstream os(dir / "run_manifest.json");
    os << j.dump(2) << '\n';
    if (!os) throw ConfigError("cannot write manifest in " + dir.string());
  }

  std::ostream& out() const { return out_; }

 private:
  std::string command_;
  const Common& opt_;
  std::ostream& out_;
  std::string started_;
  nlohmann::ordered_json extra_ = nlohmann::ordered_json::object();
};

std::ofstream open_out(const fs::path& file) {
  std::ofstream os(file);
  if (!os) throw ConfigError("cannot write " + file.string());
  return os;
}

void write_config(const RunConfig& cfg, const fs::path& file) {
  auto os = open_out(file);
  write_key_values(to_key_values(cfg), os);
}

// FNV-1a over the manifest and sample files of a split directory.
std::uint64_t checksum_split(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (const auto& f : files) {
    for (char c : f.filename().string()) mix(static_cast<unsigned char>(c));
    std::ifstream is(f, std::ios::binary);
    char buf[4096];
    while (is.read(buf, sizeof buf) || is.gcount() > 0) {
      for (std::streamsize i = 0; i < is.gcount(); ++i) mix(static_cast<unsigned char>(buf[i]));
    }
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

synth::Dataset load_data_split(const std::string& data, const std::string& split) {
  if (data.empty()) throw ConfigError("--data is required");
  if (split != "train" && split != "test") throw ConfigError("--split must be train or test");
  const fs::path dir = fs::path(data) / split;
  if (!fs::is_directory(dir)) throw ConfigError("dataset split not found: " + dir.string());
  return synth::load_split(dir);
}

std::unique_ptr<Model> load_model(const std::string& file, const char* flag) {
  if (file.empty()) throw ConfigError(std::string(flag) + " is required");
  return load_checkpoint(file);
}

int cmd_gen(const Common& opt, std::ostream& out) {
  Run run("gen", opt, out);
  const RunConfig cfg = run.config();
  const fs::path dir = run.prepare_out();
  const synth::Split split = synth::generate_split(cfg.gen);
  fs::remove_all(dir / "train");
  fs::remove_all(dir / "test");
  synth::save_split(split.train, dir / "train");
  synth::save_split(split.test, dir / "test");
  write_config(cfg, dir / "config.txt");
  const std::string sum = hex(checksum_split(dir / "train") ^ (checksum_split(dir / "test") * 31));
  run.record("n_samples", cfg.gen.n_samples);
  run.record("n_train", split.train.size());
  run.record("n_test", split.test.size());
  run.record("dataset_checksum", sum);
  run.write_manifest(dir, cfg.seed);
  out << "wrote " << split.train.size() << " train and " << split.test.size() << " test samples to "
      << dir.string() << " (checksum " << sum << ")\n";
  return kExitOk;
}

int cmd_train(const Common& opt, std::ostream& out, std::ostream& err) {
  Run run("train", opt, out);
  RunConfig cfg = run.config();
  const synth::Dataset data = load_data_split(opt.data, "train");
  if (data.empty()) throw ConfigError("training split is empty");
  cfg.model.visual_dim = cfg.gen.D_v = data.front().visual.cols();
  cfg.model.audio_dim = cfg.gen.D_a = data.front().audio.cols();
  const fs::path dir = run.prepare_out();
  write_config(cfg, dir / "config.txt");

  Model model(cfg.model, cfg.seed);
  TrainResult result;
  try {
    result = train(model, data, cfg.train, cfg.weights);
  } catch (const DivergenceError& e) {
    auto os = open_out(dir / "divergence.txt");
    os << e.what() << "\nlast finite: " << e.last_finite.to_string()
       << "\nfailing: " << e.failing.to_string() << '\n';
    err << "error: " << e.what() << "\nlast finite breakdown: " << e.last_finite.to_string() << '\n';
    run.record("status", "diverged");
    run.write_manifest(dir, cfg.seed);
    return kExitNumerical;
  }
  save_checkpoint(model, dir / "model.ckpt");
  {
    auto os = open_out(dir / "epoch_log.csv");
    write_epoch_log(result.epochs, os);
  }
  const double final_total = result.epochs.back().mean.total;
  run.record("status", "ok");
  run.record("epochs", result.epochs.size());
  run.record("ablation", opt.ablate.empty() ? "full" : opt.ablate);
  run.record("final_total_loss", fmt(final_total));
  run.record("parameters", model.params().scalar_count());
  run.write_manifest(dir, cfg.seed);
  out << "trained " << result.epochs.size() << " epochs; final loss " << fmt(final_total) << '\n';
  return kExitOk;
}

int cmd_eval(const Common& opt, std::ostream& out) {
  Run run("eval", opt, out);
  if (!(opt.coverage > 0.0 && opt.coverage < 1.0)) throw ConfigError("--coverage must lie in (0, 1)");
  const auto model = load_model(opt.checkpoint, "--checkpoint");
  const synth::Dataset data = load_data_split(opt.data, opt.split);
  if (data.empty()) throw ConfigError("split '" + opt.split + "' is empty");
  const auto records = experiment::evaluate(*model, data, opt.coverage);
  const fs::path dir = run.prepare_out();

  metrics::SummaryOptions so;
  const auto summary = metrics::summarize(records, so);
  {
    auto os = open_out(dir / "records.csv");
    metrics::write_records(records, os);
  }
  {
    auto os = open_out(dir / "summary.json");
    metrics::write_summary_json(summary, os);
  }
  {
    auto os = open_out(dir / "quantile_bins.csv");
    metrics::write_bins(summary.quantile_bins, os);
  }
  const auto& sp = summary.sparsification;
  for (const auto& [name, curve] : {std::pair{"model", &sp.model}, std::pair{"oracle", &sp.oracle},
                                    std::pair{"random", &sp.random}}) {
    auto os = open_out(dir / (std::string("sparsification_") + name + ".csv"));
    metrics::write_curve(sp.fractions, *curve, "fraction_rejected", "retained_mae", os);
  }
  run.record("checkpoint", opt.checkpoint);
  run.record("data", opt.data);
  run.record("split", opt.split);
  run.record("coverage", opt.coverage);
  run.write_manifest(dir, 0);
  out << "n=" << summary.n << " mae=" << summary.errors.mae << " rmse=" << summary.errors.rmse
      << " picp=" << summary.coverage.picp << " mpiw=" << summary.coverage.mpiw
      << " spearman(eu,|err|)=" << summary.spearman_eu_error << " ause=" << sp.ause << '\n';
  return kExitOk;
}

int cmd_corrupt_sweep(const Common& opt, std::ostream& out) {
  Run run("corrupt-sweep", opt, out);
  if (!(opt.coverage > 0.0 && opt.coverage < 1.0)) throw ConfigError("--coverage must lie in (0, 1)");
  const auto rates = experiment::parse_rates(opt.rates);
  const auto model = load_model(opt.checkpoint, "--checkpoint");
  std::unique_ptr<Model> baseline;
  if (!opt.baseline_checkpoint.empty()) baseline = load_checkpoint(opt.baseline_checkpoint);
  const synth::Dataset data = load_data_split(opt.data, opt.split);
  if (data.empty()) throw ConfigError("split '" + opt.split + "' is empty");
  const std::uint64_t seed = opt.seed.value_or(7);
  const auto rows = experiment::corruption_sweep(*model, baseline.get(), data, rates, opt.coverage,
                                                 seed, experiment::thread_budget());
  const fs::path dir = run.prepare_out();
  {
    auto os = open_out(dir / "corruption.csv");
    experiment::write_corruption_csv(rows, os);
  }
  run.record("checkpoint", opt.checkpoint);
  run.record("baseline_checkpoint", opt.baseline_checkpoint);
  run.record("rates", rates);
  run.write_manifest(dir, seed);
  experiment::write_corruption_csv(rows, out);
  return kExitOk;
}

int cmd_ablate(const Common& opt, std::ostream& out) {
  Run run("ablate", opt, out);
  if (opt.ablate.empty()) throw ConfigError("--ablate is required (a preset name, a comma list, or 'all')");
  std::vector<std::string> names;
  if (opt.ablate == "all") {
    names = AblationFlags::names();
  } else {
    std::stringstream ss(opt.ablate);
    std::string tok;
    while (std::getline(ss, tok, ',')) names.push_back(tok);
  }
  for (const auto& n : names) AblationFlags::from_name(n);
  const RunConfig cfg = run.config();
  synth::Split split;
  if (opt.data.empty()) {
    split = synth::generate_split(cfg.gen);
  } else {
    split.train = load_data_split(opt.data, "train");
    split.test = load_data_split(opt.data, "test");
  }
  if (split.test.empty()) throw ConfigError("test split is empty");
  const fs::path dir = run.prepare_out();
  auto csv = open_out(dir / "ablation.csv");
  experiment::write_ablation_header(csv);
  experiment::write_ablation_header(out);
  nlohmann::ordered_json timing = nlohmann::ordered_json::object();
  for (const auto& n : names) {
    const auto row = experiment::run_ablation(cfg, n, split);
    experiment::write_ablation_row(row, csv);
    experiment::write_ablation_row(row, out);
    csv.flush();
    timing[n] = row.seconds;
  }
  write_config(cfg, dir / "config.txt");
  run.record("ablations", names);
  run.record("train_seconds", timing);
  run.record("baseline_mae", experiment::mean_baseline_mae(split.train, split.test));
  run.write_manifest(dir, cfg.seed);
  return kExitOk;
}

void add_common(CLI::App* app, Common& o, bool config_flags) {
  app->add_option("--out", o.out, "Output directory");
  app->add_flag("--force", o.force, "Overwrite a non-empty output directory");
  if (config_flags) {
    app->add_option("--config", o.config, "key = value configuration file");
    app->add_option("--set", o.sets, "Override one setting (key=value); repeatable");
    app->add_option("--seed", o.seed, "Dataset and model seed");
  }
}

void add_training_flags(CLI::App* app, Common& o) {
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--lr", o.lr, "Adam learning rate");
  app->add_option("--batch-size", o.batch_size, "Mini-batch size");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evidential multimodal regression: data generation, training and evaluation", "evident"};
  app.require_subcommand(1);
  Common o;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic train/test dataset");
  add_common(gen, o, true);

  auto* tr = app.add_subcommand("train", "Train a model on a generated dataset");
  add_common(tr, o, true);
  add_training_flags(tr, o);
  tr->add_option("--data", o.data, "Dataset directory written by gen")->required();
  tr->add_option("--ablate", o.ablate, "Ablation preset");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_common(ev, o, false);
  ev->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  ev->add_option("--data", o.data, "Dataset directory")->required();
  ev->add_option("--split", o.split, "train or test")->capture_default_str();
  ev->add_option("--coverage", o.coverage, "Target interval coverage")->capture_default_str();

  auto* cs = app.add_subcommand("corrupt-sweep", "Evaluate under increasing time-step masking");
  add_common(cs, o, false);
  cs->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  cs->add_option("--baseline-checkpoint", o.baseline_checkpoint, "Deterministic baseline checkpoint");
  cs->add_option("--data", o.data, "Dataset directory")->required();
  cs->add_option("--split", o.split, "train or test")->capture_default_str();
  cs->add_option("--rates", o.rates, "start:stop:step or a comma list")->capture_default_str();
  cs->add_option("--coverage", o.coverage, "Target interval coverage")->capture_default_str();
  cs->add_option("--seed", o.seed, "Masking seed");

  auto* ab = app.add_subcommand("ablate", "Train and evaluate named ablation presets");
  add_common(ab, o, true);
  add_training_flags(ab, o);
  ab->add_option("--ablate", o.ablate, "Preset name, comma list, or 'all'");
  ab->add_option("--data", o.data, "Dataset directory (generated from the config if omitted)");
  ab->add_option("--coverage", o.coverage, "Target interval coverage")->capture_default_str();

  std::vector<std::string> argv_store{"evident"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(o, out);
    if (tr->parsed()) return cmd_train(o, out, err);
    if (ev->parsed()) return cmd_eval(o, out);
    if (cs->parsed()) return cmd_corrupt_sweep(o, out);
    if (ab->parsed()) return cmd_ablate(o, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace evident::cli
