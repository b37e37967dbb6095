#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "evident/model.hpp"
#include "evident/synthdata.hpp"
#include "evident/training.hpp"

// Flat key=value run configuration shared by every command.
namespace evident {

struct RunConfig {
  synth::GenConfig gen;
  ModelConfig model;
  TrainConfig train;
  LossWeights weights;
  double coverage = 0.9;
  std::uint64_t seed = 7;  // dataset and model seed

  RunConfig();
  void validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Lines are `key = value`; blank lines and lines starting with '#' are skipped.
KeyValues parse_key_values(std::istream& is);

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_settings(RunConfig& cfg, const KeyValues& kv);
RunConfig load_run_config(const std::filesystem::path& file);

// Every key with its current value, in a stable order.
KeyValues to_key_values(const RunConfig& cfg);
void write_key_values(const KeyValues& kv, std::ostream& os);

// The subset of keys that determines the model architecture.
KeyValues model_key_values(const ModelConfig& cfg);
void apply_model_setting(ModelConfig& cfg, const std::string& key, const std::string& value);

}  // namespace evident
