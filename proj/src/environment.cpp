#include "lexisafe/environment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lexisafe/errors.hpp"

namespace lexisafe {

void CmdpSpec::validate() const {
  const std::size_t sa = n_states * n_actions;
  if (n_states == 0 || n_actions == 0 || n_costs == 0) throw ConfigError(name + ": empty state, action or cost set");
  if (transition.size() != sa * n_states || reward.size() != sa || costs.size() != n_costs ||
      terminal.size() != n_states || init_dist.size() != n_states) {
    throw ConfigError(name + ": table sizes disagree with declared dimensions");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError(name + ": gamma must lie in (0, 1)");
  if (max_steps < 0) throw ConfigError(name + ": max_steps must be non-negative");
  for (std::size_t s = 0; s < n_states; ++s) {
    for (std::size_t a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (double p : next_state_probs(s, a)) {
        if (p < 0.0) throw ConfigError(name + ": negative transition probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        throw ConfigError(name + ": transition row (" + std::to_string(s) + "," + std::to_string(a) +
                          ") sums to " + std::to_string(sum));
      }
      if (r(s, a) < 0.0 || r(s, a) > r_max_bound) throw ConfigError(name + ": reward outside [0, r_m]");
      for (std::size_t j = 0; j < n_costs; ++j) {
        if (costs[j].size() != sa) throw ConfigError(name + ": cost table size mismatch");
        if (c(j, s, a) < 0.0 || c(j, s, a) > c_max_bound) throw ConfigError(name + ": cost outside [0, c_m]");
      }
    }
  }
  double d0 = 0.0;
  for (double p : init_dist) {
    if (p < 0.0) throw ConfigError(name + ": negative initial probability");
    d0 += p;
  }
  if (std::abs(d0 - 1.0) > 1e-12) throw ConfigError(name + ": initial distribution does not sum to 1");
  for (const auto& profile : scripted_actions) {
    if (profile.size() != n_states) throw ConfigError(name + ": scripted profile has wrong length");
    for (std::size_t a : profile) {
      if (a >= n_actions) throw ConfigError(name + ": scripted action out of range");
    }
  }
}

void Trajectory::recompute(double gamma, std::size_t n_costs) {
  episode_return = 0.0;
  undiscounted_return = 0.0;
  episode_costs.assign(n_costs, 0.0);
  undiscounted_costs.assign(n_costs, 0.0);
  double discount = 1.0;
  for (const auto& step : steps) {
    episode_return += discount * step.reward;
    undiscounted_return += step.reward;
    for (std::size_t j = 0; j < n_costs; ++j) {
      episode_costs[j] += discount * step.costs[j];
      undiscounted_costs[j] += step.costs[j];
    }
    discount *= gamma;
  }
}

namespace {

// Builds P and the expected-reward tables from a per-(s,a) outcome list.
struct Outcome {
  std::size_t next;
  double prob;
};

void add_outcome(std::vector<Outcome>& outcomes, std::size_t next, double prob) {
  for (auto& o : outcomes) {
    if (o.next == next) {
      o.prob += prob;
      return;
    }
  }
  outcomes.push_back({next, prob});
}

// Row normalization guards against 1-ulp drift from summing slip fractions.
void write_row(CmdpSpec& spec, std::size_t s, std::size_t a, const std::vector<Outcome>& outcomes) {
  double* row = spec.transition.data() + (s * spec.n_actions + a) * spec.n_states;
  double total = 0.0;
  for (const auto& o : outcomes) total += o.prob;
  for (const auto& o : outcomes) row[o.next] += o.prob / total;
}

}  // namespace

CmdpSpec make_chain_hazard(const ChainHazardParams& p) {
  if (p.length < 5) throw ConfigError("chain_hazard: length must be at least 5 (got " + std::to_string(p.length) + ")");
  if (!(p.hazard_cost > 0.0)) throw ConfigError("chain_hazard: hazard_cost must be positive");
  if (!(p.slip >= 0.0 && p.slip < 1.0)) throw ConfigError("chain_hazard: slip must lie in [0, 1)");
  if (p.step_reward < 0.0 || p.sprint_reward < 0.0 || p.goal_bonus < 0.0) {
    throw ConfigError("chain_hazard: rewards must be non-negative");
  }
  if (p.reward_jitter < 0.0 || p.reward_jitter >= 1.0) throw ConfigError("chain_hazard: reward_jitter must lie in [0, 1)");

  const auto n = static_cast<std::size_t>(p.length);
  const std::size_t goal = n - 1;
  enum : std::size_t { left = 0, right = 1, sprint = 2 };

  CmdpSpec spec;
  spec.name = "chain_hazard";
  spec.n_states = n;
  spec.n_actions = 3;
  spec.n_costs = 1;
  spec.gamma = p.gamma;
  spec.max_steps = p.max_steps > 0 ? p.max_steps : 3 * p.length;
  spec.action_names = {"left", "right", "sprint"};
  spec.cost_names = {"hazard"};
  spec.transition.assign(n * 3 * n, 0.0);
  spec.reward.assign(n * 3, 0.0);
  spec.costs.assign(1, std::vector<double>(n * 3, 0.0));
  spec.terminal.assign(n, 0);
  spec.terminal[goal] = 1;
  spec.init_dist.assign(n, 0.0);
  spec.init_dist[0] = 1.0;

  RngStream rng(p.seed, "chain_hazard.rewards");
  auto clamp = [&](long s) { return static_cast<std::size_t>(std::clamp<long>(s, 0, static_cast<long>(goal))); };
  auto hazard = [&](std::size_t s) { return s % 3 == 0 && s != goal; };

  double r_max = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const double jitter_step = 1.0 + p.reward_jitter * (2.0 * rng.uniform() - 1.0);
    const double jitter_sprint = 1.0 + p.reward_jitter * (2.0 * rng.uniform() - 1.0);
    for (std::size_t a = 0; a < 3; ++a) {
      std::vector<Outcome> outcomes;
      if (spec.is_terminal(s)) {
        add_outcome(outcomes, s, 1.0);
        write_row(spec, s, a, outcomes);
        continue;
      }
      const long step = a == left ? -1 : (a == right ? 1 : 2);
      add_outcome(outcomes, clamp(static_cast<long>(s) + step), 1.0 - p.slip);
      if (p.slip > 0.0) {
        add_outcome(outcomes, clamp(static_cast<long>(s) - 1), 0.5 * p.slip);
        add_outcome(outcomes, clamp(static_cast<long>(s) + 1), 0.5 * p.slip);
      }
      write_row(spec, s, a, outcomes);

      double reward = 0.0;
      if (a == right) reward = p.step_reward * jitter_step;
      if (a == sprint) reward = p.sprint_reward * jitter_sprint;
      reward += p.goal_bonus * spec.next_state_probs(s, a)[goal];
      spec.reward[s * 3 + a] = reward;
      r_max = std::max(r_max, reward);
      if (a == sprint && hazard(s)) spec.costs[0][s * 3 + a] = p.hazard_cost;
    }
  }
  spec.r_max_bound = std::max(r_max, 1e-12);
  spec.c_max_bound = p.hazard_cost;

  // mask 0: reward-greedy (always sprint); mask 1: safe (never sprint).
  spec.scripted_actions = {std::vector<std::size_t>(n, sprint), std::vector<std::size_t>(n, right)};
  spec.validate();
  return spec;
}

CmdpSpec make_chain_hazard(int length, double hazard_cost, std::uint64_t seed) {
  ChainHazardParams params;
  params.length = length;
  params.hazard_cost = hazard_cost;
  params.seed = seed;
  return make_chain_hazard(params);
}

CmdpSpec make_grid_twocost(const GridTwoCostParams& p) {
  if (p.width < 4 || p.height < 4) {
    throw ConfigError("grid_twocost: width and height must be at least 4 (got " + std::to_string(p.width) + "x" +
                      std::to_string(p.height) + ")");
  }
  if (!(p.slip >= 0.0 && p.slip < 1.0)) throw ConfigError("grid_twocost: slip must lie in [0, 1)");
  if (!(p.crash_cost > 0.0 && p.speed_cost > 0.0)) throw ConfigError("grid_twocost: costs must be positive");
  if (p.wall_rows < 0 || p.wall_rows >= p.height) throw ConfigError("grid_twocost: wall_rows must lie in [0, height)");

  const int w = p.width;
  const int h = p.height;
  const auto n = static_cast<std::size_t>(w * h);
  const std::size_t n_actions = 8;
  auto index = [w](int x, int y) { return static_cast<std::size_t>(y * w + x); };
  const std::size_t goal = index(w - 1, 0);

  // Wall at the middle column, open from the gap row upward.
  const int wall_x = w / 2;
  RngStream rng(p.seed, "grid_twocost.layout");
  const int seeded_gap = h / 2 + static_cast<int>(rng.below(static_cast<std::size_t>(h - h / 2)));
  const int gap_row = p.wall_rows > 0 ? p.wall_rows : seeded_gap;
  std::vector<std::uint8_t> obstacle(n, 0);
  for (int y = 0; y < gap_row; ++y) obstacle[index(wall_x, y)] = 1;

  // Actions: up, down, left, right, then the same four as double moves.
  const int dx[4] = {0, 0, -1, 1};
  const int dy[4] = {1, -1, 0, 0};

  CmdpSpec spec;
  spec.name = "grid_twocost";
  spec.n_states = n;
  spec.n_actions = n_actions;
  spec.n_costs = 2;
  spec.gamma = p.gamma;
  spec.max_steps = p.max_steps > 0 ? p.max_steps : 3 * (w + h);
  spec.action_names = {"up", "down", "left", "right", "up2", "down2", "left2", "right2"};
  spec.cost_names = {"crash", "speed"};
  spec.transition.assign(n * n_actions * n, 0.0);
  spec.reward.assign(n * n_actions, 0.0);
  spec.costs.assign(2, std::vector<double>(n * n_actions, 0.0));
  spec.terminal.assign(n, 0);
  spec.terminal[goal] = 1;
  spec.init_dist.assign(n, 0.0);
  spec.init_dist[index(0, 0)] = 1.0;

  // Walks cell by cell, stopping at walls and at the goal. Returns the final
  // cell and whether any traversed cell is an obstacle.
  auto walk = [&](int x, int y, int dir, int len) {
    bool crashed = false;
    for (int k = 0; k < len; ++k) {
      const int nx = std::clamp(x + dx[dir], 0, w - 1);
      const int ny = std::clamp(y + dy[dir], 0, h - 1);
      x = nx;
      y = ny;
      if (obstacle[index(x, y)]) crashed = true;
      if (index(x, y) == goal) break;
    }
    return std::pair<std::size_t, bool>{index(x, y), crashed};
  };

  double r_max = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t s = index(x, y);
      for (std::size_t a = 0; a < n_actions; ++a) {
        std::vector<Outcome> outcomes;
        if (spec.is_terminal(s)) {
          add_outcome(outcomes, s, 1.0);
          write_row(spec, s, a, outcomes);
          continue;
        }
        const int dir = static_cast<int>(a % 4);
        const int len = a < 4 ? 1 : 2;
        double crash_prob = 0.0;
        const auto [intended, intended_crash] = walk(x, y, dir, len);
        add_outcome(outcomes, intended, 1.0 - p.slip);
        if (intended_crash) crash_prob += 1.0 - p.slip;
        if (p.slip > 0.0) {
          for (int d = 0; d < 4; ++d) {
            const auto [slipped, slipped_crash] = walk(x, y, d, 1);
            add_outcome(outcomes, slipped, 0.25 * p.slip);
            if (slipped_crash) crash_prob += 0.25 * p.slip;
          }
        }
        write_row(spec, s, a, outcomes);
        const double reward = p.goal_bonus * spec.next_state_probs(s, a)[goal];
        spec.reward[s * n_actions + a] = reward;
        r_max = std::max(r_max, reward);
        spec.costs[0][s * n_actions + a] = std::min(p.crash_cost * crash_prob, p.crash_cost);
        if (len == 2) spec.costs[1][s * n_actions + a] = p.speed_cost;
      }
    }
  }
  spec.r_max_bound = std::max(r_max, 1e-12);
  spec.c_max_bound = std::max(p.crash_cost, p.speed_cost);

  // Scripted profiles: bit 0 avoids crashes by routing through the gap,
  // bit 1 avoids speed cost by using single moves.
  spec.scripted_actions.assign(4, std::vector<std::size_t>(n, 3));
  for (std::size_t mask = 0; mask < 4; ++mask) {
    const bool crash_safe = mask & 1U;
    const std::size_t speed_offset = (mask & 2U) ? 0 : 4;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        std::size_t dir = 3;  // right
        if (x == w - 1) {
          dir = 1;  // down the last column to the goal
        } else if (crash_safe && x < wall_x && y < gap_row) {
          dir = 0;  // climb to the gap before crossing
        }
        spec.scripted_actions[mask][index(x, y)] = dir + speed_offset;
      }
    }
  }
  spec.validate();
  return spec;
}

CmdpSpec make_grid_twocost(int width, int height, std::uint64_t seed) {
  GridTwoCostParams params;
  params.width = width;
  params.height = height;
  params.seed = seed;
  return make_grid_twocost(params);
}

StepResult env_step(const CmdpSpec& spec, std::size_t state, std::size_t action, int steps_taken, RngStream& rng) {
  if (state >= spec.n_states || action >= spec.n_actions) throw UsageError("env_step: state or action out of range");
  if (spec.is_terminal(state)) throw UsageError("env_step: cannot step from terminal state " + std::to_string(state));
  StepResult result;
  result.next_state = rng.categorical(spec.next_state_probs(state, action));
  result.reward = spec.r(state, action);
  result.costs.resize(spec.n_costs);
  for (std::size_t j = 0; j < spec.n_costs; ++j) result.costs[j] = spec.c(j, state, action);
  const bool truncated = spec.max_steps > 0 && steps_taken + 1 >= spec.max_steps;
  result.done = spec.is_terminal(result.next_state) || truncated;
  return result;
}

std::vector<double> featurize(const CmdpSpec& spec, std::size_t state) {
  if (state >= spec.n_states) {
    throw UsageError("featurize: state " + std::to_string(state) + " out of range [0, " +
                     std::to_string(spec.n_states) + ")");
  }
  std::vector<double> obs(spec.n_states, 0.0);
  obs[state] = 1.0;
  return obs;
}

std::size_t state_of(std::span<const double> obs) {
  return static_cast<std::size_t>(std::max_element(obs.begin(), obs.end()) - obs.begin());
}

std::size_t state_of(std::span<const float> obs) {
  return static_cast<std::size_t>(std::max_element(obs.begin(), obs.end()) - obs.begin());
}

std::size_t sample_initial_state(const CmdpSpec& spec, RngStream& rng) { return rng.categorical(spec.init_dist); }

namespace {
// Guards rollouts of untruncated environments whose policy never reaches a
// terminal state.
constexpr int kMaxUntruncatedSteps = 1'000'000;
}  // namespace

Trajectory rollout(const CmdpSpec& spec, const ActionSelector& select, RngStream& rng) {
  Trajectory traj;
  std::size_t s = sample_initial_state(spec, rng);
  int t = 0;
  bool done = spec.is_terminal(s);
  while (!done) {
    const std::size_t a = select(s, rng);
    StepResult step = env_step(spec, s, a, t, rng);
    traj.steps.push_back({s, a, step.reward, step.costs, step.next_state, step.done});
    s = step.next_state;
    done = step.done;
    ++t;
    if (spec.max_steps == 0 && t >= kMaxUntruncatedSteps) {
      throw UsageError(spec.name + ": episode ran " + std::to_string(t) + " steps without terminating");
    }
  }
  traj.recompute(spec.gamma, spec.n_costs);
  return traj;
}

}  // namespace lexisafe
