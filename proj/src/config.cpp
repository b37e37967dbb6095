#include "evident/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>

#include "evident/errors.hpp"

namespace evident {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(std::size_t v) { return std::to_string(v); }
std::string fmt(std::uint64_t v, int) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename T, typename Owner>
Setter number(T Owner::*field, Owner RunConfig::*owner) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    (c.*owner).*field = parse_number<T>(k, v);
  };
}

template <typename T>
Setter top_number(T RunConfig::*field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    c.*field = parse_number<T>(k, v);
  };
}

template <typename T>
Setter model_number(T ModelConfig::*field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    c.model.*field = parse_number<T>(k, v);
  };
}

Setter flag(bool AblationFlags::*field) {
  return [=](RunConfig& c, const std::string& k, const std::string& v) {
    c.model.flags.*field = parse_bool(k, v);
  };
}

struct FlagName {
  const char* key;
  bool AblationFlags::*field;
};

const FlagName kFlags[] = {
    {"flag.temporal", &AblationFlags::temporal},
    {"flag.freq_refine", &AblationFlags::freq_refine},
    {"flag.moe", &AblationFlags::moe},
    {"flag.all_cnn", &AblationFlags::all_cnn},
    {"flag.all_transformer", &AblationFlags::all_transformer},
    {"flag.reversed_moe", &AblationFlags::reversed_moe},
    {"flag.gating", &AblationFlags::gating},
    {"flag.orth", &AblationFlags::orth},
    {"flag.aln", &AblationFlags::aln},
    {"flag.rec", &AblationFlags::rec},
    {"flag.entangled", &AblationFlags::entangled},
    {"flag.shared_only", &AblationFlags::shared_only},
    {"flag.private_only", &AblationFlags::private_only},
    {"flag.single_head", &AblationFlags::single_head},
    {"flag.nig", &AblationFlags::nig},
    {"flag.fusion", &AblationFlags::fusion},
};

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    using G = synth::GenConfig;
    std::map<std::string, Setter> t;
    t["n_samples"] = number(&G::n_samples, &RunConfig::gen);
    t["n_test"] = number(&G::n_test, &RunConfig::gen);
    t["T"] = number(&G::T, &RunConfig::gen);
    t["D_v"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.gen.D_v = c.model.visual_dim = parse_number<std::size_t>(k, v);
    };
    t["D_a"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.gen.D_a = c.model.audio_dim = parse_number<std::size_t>(k, v);
    };
    t["latent_dim"] = number(&G::latent_dim, &RunConfig::gen);
    t["shared_strength"] = number(&G::shared_strength, &RunConfig::gen);
    t["private_strength"] = number(&G::private_strength, &RunConfig::gen);
    t["noise_scale"] = number(&G::noise_scale, &RunConfig::gen);
    t["hetero"] = number(&G::hetero, &RunConfig::gen);
    t["obs_noise"] = number(&G::obs_noise, &RunConfig::gen);
    t["label_noise"] = number(&G::label_noise, &RunConfig::gen);
    t["score_low"] = number(&G::score_low, &RunConfig::gen);
    t["score_high"] = number(&G::score_high, &RunConfig::gen);
    t["dropout_max"] = number(&G::dropout_max, &RunConfig::gen);
    t["oversample_threshold"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.gen.oversample_threshold = c.train.oversample_threshold = parse_number<double>(k, v);
    };
    t["oversample_factor"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.gen.oversample_factor = c.train.oversample_factor = parse_number<std::size_t>(k, v);
    };

    t["hidden_dim"] = model_number(&ModelConfig::hidden_dim);
    t["levels"] = model_number(&ModelConfig::levels);
    t["kernel_size"] = model_number(&ModelConfig::kernel_size);
    t["cmd_order"] = model_number(&ModelConfig::cmd_order);
    t["ablation"] = [](RunConfig& c, const std::string&, const std::string& v) {
      c.model.flags = AblationFlags::from_name(v);
    };
    for (const auto& f : kFlags) t[f.key] = flag(f.field);

    t["epochs"] = number(&TrainConfig::epochs, &RunConfig::train);
    t["batch_size"] = number(&TrainConfig::batch_size, &RunConfig::train);
    t["lr"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.adam.lr = parse_number<double>(k, v);
    };
    t["adam_beta1"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.adam.beta1 = parse_number<double>(k, v);
    };
    t["adam_beta2"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.adam.beta2 = parse_number<double>(k, v);
    };
    t["adam_eps"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.adam.eps = parse_number<double>(k, v);
    };
    t["clip_norm"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.adam.clip_norm = parse_number<double>(k, v);
    };
    t["oversample"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.oversample = parse_bool(k, v);
    };
    t["divergence_limit"] = number(&TrainConfig::divergence_limit, &RunConfig::train);
    t["augment_mask_max"] = number(&TrainConfig::augment_mask_max, &RunConfig::train);

    t["lambda_aln"] = number(&LossWeights::lambda_aln, &RunConfig::weights);
    t["lambda_rec"] = number(&LossWeights::lambda_rec, &RunConfig::weights);
    t["lambda_orth"] = number(&LossWeights::lambda_orth, &RunConfig::weights);
    t["lambda_aux"] = number(&LossWeights::lambda_aux, &RunConfig::weights);
    t["lambda_r"] = number(&LossWeights::lambda_r, &RunConfig::weights);
    t["burn_in"] = number(&LossWeights::burn_in, &RunConfig::weights);

    t["coverage"] = top_number(&RunConfig::coverage);
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.seed = c.gen.seed = c.train.seed = parse_number<std::uint64_t>(k, v);
    };
    return t;
  }();
  return table;
}

}  // namespace

RunConfig::RunConfig() {
  model.visual_dim = gen.D_v;
  model.audio_dim = gen.D_a;
  gen.seed = train.seed = seed;
  train.oversample_threshold = gen.oversample_threshold;
  train.oversample_factor = gen.oversample_factor;
}

void RunConfig::validate() const {
  gen.validate();
  model.validate();
  train.validate();
  weights.validate();
  if (!(coverage > 0.0 && coverage < 1.0)) throw ConfigError("coverage must lie in (0, 1)");
}

KeyValues parse_key_values(std::istream& is) {
  KeyValues out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(is, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    out.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return out;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown configuration key: " + key);
  it->second(cfg, key, value);
}

void apply_settings(RunConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_setting(cfg, k, v);
}

RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ConfigError("cannot open config file: " + file.string());
  RunConfig cfg;
  apply_settings(cfg, parse_key_values(is));
  cfg.validate();
  return cfg;
}

KeyValues model_key_values(const ModelConfig& m) {
  KeyValues kv = {{"D_v", fmt(m.visual_dim)},
                  {"D_a", fmt(m.audio_dim)},
                  {"hidden_dim", fmt(m.hidden_dim)},
                  {"levels", fmt(m.levels)},
                  {"kernel_size", fmt(m.kernel_size)},
                  {"cmd_order", std::to_string(m.cmd_order)}};
  for (const auto& f : kFlags) kv.emplace_back(f.key, fmt(m.flags.*f.field));
  return kv;
}

void apply_model_setting(ModelConfig& cfg, const std::string& key, const std::string& value) {
  RunConfig tmp;
  tmp.model = cfg;
  apply_setting(tmp, key, value);
  cfg = tmp.model;
}

KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv = {{"seed", fmt(c.seed, 0)},
                  {"n_samples", fmt(c.gen.n_samples)},
                  {"n_test", fmt(c.gen.n_test)},
                  {"T", fmt(c.gen.T)},
                  {"latent_dim", fmt(c.gen.latent_dim)},
                  {"shared_strength", fmt(c.gen.shared_strength)},
                  {"private_strength", fmt(c.gen.private_strength)},
                  {"noise_scale", fmt(c.gen.noise_scale)},
                  {"hetero", fmt(c.gen.hetero)},
                  {"obs_noise", fmt(c.gen.obs_noise)},
                  {"label_noise", fmt(c.gen.label_noise)},
                  {"score_low", fmt(c.gen.score_low)},
                  {"score_high", fmt(c.gen.score_high)},
                  {"dropout_max", fmt(c.gen.dropout_max)},
                  {"oversample_threshold", fmt(c.train.oversample_threshold)},
                  {"oversample_factor", fmt(c.train.oversample_factor)}};
  for (auto& p : model_key_values(c.model)) kv.push_back(std::move(p));
  const KeyValues rest = {{"epochs", fmt(c.train.epochs)},
                          {"batch_size", fmt(c.train.batch_size)},
                          {"lr", fmt(c.train.adam.lr)},
                          {"adam_beta1", fmt(c.train.adam.beta1)},
                          {"adam_beta2", fmt(c.train.adam.beta2)},
                          {"adam_eps", fmt(c.train.adam.eps)},
                          {"clip_norm", fmt(c.train.adam.clip_norm)},
                          {"oversample", fmt(c.train.oversample)},
                          {"divergence_limit", fmt(c.train.divergence_limit)},
                          {"augment_mask_max", fmt(c.train.augment_mask_max)},
                          {"lambda_aln", fmt(c.weights.lambda_aln)},
                          {"lambda_rec", fmt(c.weights.lambda_rec)},
                          {"lambda_orth", fmt(c.weights.lambda_orth)},
                          {"lambda_aux", fmt(c.weights.lambda_aux)},
                          {"lambda_r", fmt(c.weights.lambda_r)},
                          {"burn_in", fmt(c.weights.burn_in)},
                          {"coverage", fmt(c.coverage)}};
  kv.insert(kv.end(), rest.begin(), rest.end());
  return kv;
}

void write_key_values(const KeyValues& kv, std::ostream& os) {
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

}  // namespace evident
