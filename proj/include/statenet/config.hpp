#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "statenet/augment.hpp"
#include "statenet/model.hpp"
#include "statenet/training.hpp"

namespace statenet {

// Everything a training run needs. Precedence when resolving:
// built-in defaults < config file < command-line flags.
struct RunConfig {
  ModelConfig model;
  Hyperparams hyper;
  AugmentPolicy augment;
  NormMode norm_mode = NormMode::Standardize;
  std::filesystem::path data_root;
  std::filesystem::path out_dir;
  std::string train_split = "train";
  std::string val_split = "val";
  bool deterministic = true;

  void validate() const;
};

// A config-file key; the command-line flag is "--" + name.
struct ConfigKey {
  std::string name;
  std::string help;
  bool boolean = false;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

const std::vector<ConfigKey>& config_keys();
const ConfigKey& find_config_key(std::string_view name);

// Keys accept '-' or '_' as separators.
void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value);

// Flat "key = value" lines; '#' starts a comment.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);
void parse_config_text(RunConfig& cfg, std::string_view text, const std::string& origin);

// Every key as "key = value", re-loadable with load_config_file.
std::string render_config(const RunConfig& cfg);

}  // namespace statenet
