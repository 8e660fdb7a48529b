#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lexisafe/rng.hpp"

namespace lexisafe {

/// Tabular constrained MDP with one or more bounded cost channels.
///
/// Tables are flat and row-major: transition[(s * A + a) * S + s'],
/// reward[s * A + a], costs[j][s * A + a].
struct CmdpSpec {
  std::string name;
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t n_costs = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  std::vector<std::vector<double>> costs;
  double gamma = 0.99;
  std::vector<double> init_dist;
  int max_steps = 0;  // 0 means no truncation
  std::vector<std::uint8_t> terminal;
  double r_max_bound = 1.0;
  double c_max_bound = 1.0;
  std::vector<std::string> action_names;
  std::vector<std::string> cost_names;

  // Scripted behavior: scripted_actions[mask][s]. Bit j of mask set means the
  // profile avoids cost channel j; mask 0 is the reward-greedy profile.
  std::vector<std::vector<std::size_t>> scripted_actions;

  std::span<const double> next_state_probs(std::size_t s, std::size_t a) const {
    return {transition.data() + (s * n_actions + a) * n_states, n_states};
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }
  double c(std::size_t j, std::size_t s, std::size_t a) const { return costs[j][s * n_actions + a]; }
  bool is_terminal(std::size_t s) const { return terminal[s] != 0; }
  std::size_t obs_dim() const { return n_states; }
  std::size_t fully_safe_mask() const { return (std::size_t{1} << n_costs) - 1; }

  /// Checks every structural invariant; throws ConfigError on violation.
  void validate() const;
  bool operator==(const CmdpSpec&) const = default;
};

struct StepResult {
  std::size_t next_state = 0;
  double reward = 0.0;
  std::vector<double> costs;
  bool done = false;
};

struct TrajectoryStep {
  std::size_t state;
  std::size_t action;
  double reward;
  std::vector<double> costs;
  std::size_t next_state;
  bool done;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  double episode_return = 0.0;            // discounted
  std::vector<double> episode_costs;      // discounted, per channel
  double undiscounted_return = 0.0;
  std::vector<double> undiscounted_costs;

  /// Recomputes the discounted sums from the recorded steps.
  void recompute(double gamma, std::size_t n_costs);
};

struct ChainHazardParams {
  int length = 12;
  double hazard_cost = 4.0;
  std::uint64_t seed = 0;
  double slip = 0.0;
  double gamma = 0.95;
  int max_steps = 0;  // 0 selects 3 * length
  double step_reward = 1.0;
  double sprint_reward = 2.0;
  double goal_bonus = 25.0;
  double reward_jitter = 0.05;
};

/// Chain of cells with actions {left, right, sprint}. Sprinting from a hazard
/// cell (every third cell, starting at 0) incurs hazard_cost; the rightmost
/// cell is terminal and pays goal_bonus on arrival.
CmdpSpec make_chain_hazard(const ChainHazardParams& params);
CmdpSpec make_chain_hazard(int length, double hazard_cost, std::uint64_t seed);

struct GridTwoCostParams {
  int width = 6;
  int height = 4;
  std::uint64_t seed = 0;
  double slip = 0.1;
  double gamma = 0.95;
  int max_steps = 0;  // 0 selects 3 * (width + height)
  double goal_bonus = 10.0;
  double crash_cost = 1.0;
  double speed_cost = 1.0;
  int wall_rows = 0;  // obstacle cells in the wall column; 0 draws the height from seed
};

/// Grid navigation from the bottom-left to the bottom-right corner across an
/// obstacle wall with a single gap. Channel 0 ("crash") charges passing
/// through obstacle cells; channel 1 ("speed") charges double moves.
CmdpSpec make_grid_twocost(const GridTwoCostParams& params);
CmdpSpec make_grid_twocost(int width, int height, std::uint64_t seed);

/// Samples one transition. steps_taken counts steps already executed in the
/// episode and drives truncation at max_steps.
StepResult env_step(const CmdpSpec& spec, std::size_t state, std::size_t action, int steps_taken, RngStream& rng);

/// One-hot encoding of a state index.
std::vector<double> featurize(const CmdpSpec& spec, std::size_t state);

/// Index of the hot entry of a one-hot observation.
std::size_t state_of(std::span<const double> obs);
std::size_t state_of(std::span<const float> obs);

std::size_t sample_initial_state(const CmdpSpec& spec, RngStream& rng);

using ActionSelector = std::function<std::size_t(std::size_t state, RngStream& rng)>;

/// Runs one episode from d0 until done.
Trajectory rollout(const CmdpSpec& spec, const ActionSelector& select, RngStream& rng);

}  // namespace lexisafe
