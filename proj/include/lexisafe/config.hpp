#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lexisafe/dataset.hpp"
#include "lexisafe/environment.hpp"
#include "lexisafe/evaluation.hpp"
#include "lexisafe/trainer.hpp"

namespace lexisafe {

/// Flat `[section]` / `key = value` document. `#` and `;` start comments.
struct ConfigEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct ConfigSection {
  std::string name;
  std::vector<ConfigEntry> entries;
};

struct ConfigDocument {
  std::vector<ConfigSection> sections;
};

/// Throws ConfigError on syntax errors, duplicate sections or duplicate keys.
ConfigDocument parse_config_text(std::string_view text);

std::size_t edit_distance(std::string_view a, std::string_view b);
/// Closest candidate within a small edit distance, if any.
std::optional<std::string> closest_match(std::string_view word, const std::vector<std::string>& candidates);

struct EnvConfig {
  std::string name = "chain_hazard";
  ChainHazardParams chain;
  GridTwoCostParams grid;

  CmdpSpec build() const;
  double gamma() const;
};

struct DatasetConfig {
  std::filesystem::path path;  // empty: commands that need data generate it
  int n_episodes = 1000;
  std::uint64_t seed = 0;
};

struct EvalConfig {
  std::size_t n_episodes = 10;
  std::vector<std::uint64_t> seeds{14, 42, 84, 98, 49};
  std::optional<double> r_min;
  std::optional<double> r_max;
  std::vector<double> kappa_eval;  // empty: use the training thresholds
  bool stochastic = true;
  std::size_t curve_interval = 100;  // steps between oracle curve points; 0 disables
  std::size_t bc_steps = 2000;
};

struct SweepConfig {
  std::vector<std::size_t> n_grid{500, 1500, 5000, 15000, 50000};
  std::vector<std::uint64_t> seeds{7, 17, 27};
};

struct AblationConfig {
  std::vector<std::vector<double>> weights{{1, 1}, {10, 1}, {100, 1}, {1000, 1}, {5000, 1}};
  std::vector<std::uint64_t> seeds{7, 17, 27, 77, 777};
};

struct ReportConfig {
  std::filesystem::path run_dir;
};

struct RunConfig {
  EnvConfig env;
  BehaviorPolicySpec behavior;
  DatasetConfig dataset;
  TrainConfig train;
  std::size_t checkpoint_interval = 5000;
  EvalConfig eval;
  SweepConfig sweep;
  AblationConfig ablation;
  ReportConfig report;

  /// Evaluation thresholds: eval.kappa_eval, or the training thresholds.
  std::vector<double> kappa_eval() const;
  NormalizationConstants normalization(const CmdpSpec& env) const;
};

/// Applies defaults and checks every key against the schema. Relative paths
/// are resolved against base_dir.
RunConfig resolve_config(const ConfigDocument& doc, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully expanded config with sorted sections and keys; parsing it back
/// yields the same RunConfig.
std::string canonical_config_text(const RunConfig& config);

}  // namespace lexisafe
