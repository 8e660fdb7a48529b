#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "lexisafe/config.hpp"

namespace lexisafe {

struct CliOptions {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out;
  std::filesystem::path policy;
  bool force = false;
  std::size_t jobs = 1;
};

/// Prepares the output directory, writes the resolved config snapshot and
/// dispatches. Errors are reported on stderr and mapped to exit codes.
int run_command(const CliOptions& options);

// The commands assume `out` exists and may be written to.
void cmd_gen_data(const RunConfig& config, const std::filesystem::path& out);
void cmd_train(const RunConfig& config, const std::filesystem::path& out);
void cmd_eval(const RunConfig& config, const std::filesystem::path& policy_path, const std::filesystem::path& out);
void cmd_sweep(const RunConfig& config, const std::filesystem::path& out, std::size_t jobs);
void cmd_ablate(const RunConfig& config, const std::filesystem::path& out, std::size_t jobs);
void cmd_report(const RunConfig& config, const std::filesystem::path& out);

/// metrics.csv header for an n_costs-channel run.
std::vector<std::string> metrics_columns(std::size_t n_costs);

/// Fraction of dataset episodes whose discounted cost stays within kappa on
/// every channel.
double safe_episode_fraction(const Dataset& ds, double gamma, const std::vector<double>& kappa);

constexpr const char* kConfigSnapshot = "config.resolved.ini";

}  // namespace lexisafe
