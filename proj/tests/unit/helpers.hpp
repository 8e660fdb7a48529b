#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lexisafe/environment.hpp"

namespace lexisafe::testing {

// Single non-terminal state that loops to itself. Per-action reward and
// cost tables; max_steps = 0 means an infinite horizon.
inline CmdpSpec one_state_env(std::vector<double> rewards, std::vector<double> costs, double gamma = 0.5,
                              int max_steps = 0) {
  CmdpSpec env;
  env.name = "one_state";
  env.n_states = 1;
  env.n_actions = rewards.size();
  env.n_costs = 1;
  env.transition.assign(env.n_actions, 1.0);
  env.reward = std::move(rewards);
  env.costs = {std::move(costs)};
  env.gamma = gamma;
  env.init_dist = {1.0};
  env.max_steps = max_steps;
  env.terminal = {0};
  env.r_max_bound = 10.0;
  env.c_max_bound = 10.0;
  env.scripted_actions = {{0}, {0}};
  env.validate();
  return env;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lexisafe_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace lexisafe::testing
