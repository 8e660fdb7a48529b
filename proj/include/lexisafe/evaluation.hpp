#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexisafe/critics.hpp"
#include "lexisafe/dataset.hpp"
#include "lexisafe/environment.hpp"
#include "lexisafe/trainer.hpp"

namespace lexisafe {

/// Markov policy as an S x A row-major table of action probabilities.
struct PolicyTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> probs;

  std::span<const double> row(std::size_t s) const { return {probs.data() + s * n_actions, n_actions}; }
  double operator()(std::size_t s, std::size_t a) const { return probs[s * n_actions + a]; }
};

/// Greedy tables put all mass on PolicyHead::greedy_action.
PolicyTable tabulate_policy(const CmdpSpec& env, const PolicyHead& policy, bool stochastic);
PolicyTable scripted_policy_table(const CmdpSpec& env, std::size_t mask, double epsilon);
PolicyTable uniform_policy_table(const CmdpSpec& env);
PolicyTable deterministic_policy_table(const CmdpSpec& env, std::span<const std::size_t> actions);

/// S x A table of the per-step signal for a channel.
std::vector<double> channel_table(const CmdpSpec& env, Channel ch);

struct OracleReport {
  std::vector<double> q;  // S x A
  std::vector<double> v;  // S
  double j = 0.0;         // sum_s d0(s) V(s)
  std::size_t iterations = 0;
  double residual = 0.0;
  bool finite_horizon = false;
};

/// Exact policy evaluation. With max_steps > 0 this is backward recursion
/// over the horizon (the returned tables are the first-step values);
/// otherwise it iterates the Bellman operator to a sup-norm residual below
/// tol. gamma defaults to env.gamma.
OracleReport policy_evaluation_oracle(const CmdpSpec& env, const PolicyTable& policy, Channel ch,
                                      std::optional<double> gamma = std::nullopt, double tol = 1e-11,
                                      std::size_t max_iterations = 1'000'000);

/// Largest |Q_learned - Q_exact| over non-terminal (s, a).
double critic_sup_error(const CriticSet& critics, const CmdpSpec& env, const OracleReport& exact, Channel ch);

struct OptimalReport {
  std::vector<double> v;  // S, first-step values
  double j = 0.0;
  std::vector<std::size_t> actions;  // greedy stationary action per state
};

/// Optimal (maximize) or worst (minimize) value of an S x A signal, with the
/// same horizon handling as policy_evaluation_oracle.
OptimalReport optimal_value(const CmdpSpec& env, std::span<const double> signal, bool maximize,
                            std::optional<double> gamma = std::nullopt, double tol = 1e-11);

/// Returns used to normalize reward; discounted ones use env.gamma, the
/// undiscounted ones sum rewards over the truncated episode.
struct NormalizationConstants {
  double r_min = 0.0;
  double r_max = 1.0;
  double r_min_undiscounted = 0.0;
  double r_max_undiscounted = 1.0;
};

NormalizationConstants normalization_constants(const CmdpSpec& env);

/// Best deterministic policy whose exact discounted costs stay within kappa,
/// found by sweeping Lagrange penalties on the kappa-scaled costs.
struct SafeOptimum {
  std::vector<std::size_t> actions;
  double j_r = 0.0;
  std::vector<double> j_c;
  bool found = false;
};

SafeOptimum safe_optimal_policy(const CmdpSpec& env, std::span<const double> kappa);

/// Exact discounted returns of a policy on every channel.
struct ExactReturns {
  double j_r = 0.0;
  std::vector<double> j_c;
};

ExactReturns exact_returns(const CmdpSpec& env, const PolicyTable& policy);

struct EvalSettings {
  std::size_t n_episodes = 50;
  std::vector<std::uint64_t> seeds{14, 42, 84, 98, 49};
  std::vector<double> kappa_eval;  // undiscounted per-episode thresholds
  bool stochastic = false;
};

struct EvalReport {
  std::size_t n_episodes = 0;
  std::vector<std::uint64_t> eval_seeds;
  double mean_return = 0.0;  // undiscounted
  double std_return = 0.0;
  std::vector<double> mean_costs;
  std::vector<double> std_costs;
  double mean_discounted_return = 0.0;
  double std_discounted_return = 0.0;
  std::vector<double> mean_discounted_costs;
  std::vector<double> std_discounted_costs;
  double normalized_reward = 0.0;
  std::vector<double> normalized_costs;
  std::vector<bool> safe;
};

/// Episode i draws from stream (seeds[i % |seeds|], "eval.episode", i / |seeds|).
EvalReport rollout_eval(const CmdpSpec& env, const ActionSelector& select, const EvalSettings& settings,
                        const NormalizationConstants& norm);
EvalReport rollout_eval(const CmdpSpec& env, const PolicyHead& policy, const EvalSettings& settings,
                        const NormalizationConstants& norm);

/// Normalized reward and costs of a policy from exact discounted returns.
struct CurvePoint {
  double j_r = 0.0;
  std::vector<double> j_c;
  double normalized_reward = 0.0;
  std::vector<double> normalized_costs;
};

CurvePoint oracle_curve_point(const CmdpSpec& env, const PolicyTable& policy, std::span<const double> kappa,
                              const NormalizationConstants& norm);

struct ConcentrabilityReport {
  std::vector<double> d_pi;    // S x A
  std::vector<double> d_beta;  // S x A
  double c_hat = 0.0;
  double unvisited_mass = 0.0;
};

/// Discounted state-action occupancy from d0, normalized to sum to one.
std::vector<double> occupancy(const CmdpSpec& env, const PolicyTable& policy);
/// Occupancy of the per-episode profile mixture used for data generation.
std::vector<double> behavior_occupancy(const CmdpSpec& env, const BehaviorPolicySpec& behavior);

ConcentrabilityReport concentrability_from_occupancies(std::vector<double> d_pi, std::vector<double> d_beta);
ConcentrabilityReport concentrability_estimate(const CmdpSpec& env, const PolicyTable& policy,
                                               const BehaviorPolicySpec& behavior);
ConcentrabilityReport concentrability_estimate(const CmdpSpec& env, const PolicyTable& policy,
                                               const PolicyTable& behavior);

struct BcSettings {
  std::vector<std::size_t> hidden_dims{64, 64};
  std::size_t steps = 2000;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Plain NLL fit of the dataset actions.
PolicyHead train_bc_policy(const Dataset& ds, const BcSettings& settings);

/// Mean over dataset rows of KL(pi(.|s) || pi_bc(.|s)), pi_bc floored at 1e-8.
double kl_monitor(const PolicyHead& policy, const PolicyHead& bc, const Dataset& ds);
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of log(err + floor) on log(n).
LinearFit fit_loglog(std::span<const double> n, std::span<const double> err, double floor = 1e-6);

struct ScalingCell {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool valid = true;
  std::string error;
  double violation = 0.0;      // sum_j max(0, J_c_j - kappa_j)
  double suboptimality = 0.0;  // max(0, J*_r - J_r)
  double j_r = 0.0;
  std::vector<double> j_c;
};

struct ScalingReport {
  std::vector<ScalingCell> cells;  // sorted by (n, seed)
  std::vector<std::size_t> n_grid;
  std::vector<double> mean_violation;
  std::vector<double> mean_suboptimality;
  LinearFit suboptimality_fit;
  LinearFit violation_fit;
  std::size_t seeds_per_cell = 0;
  std::size_t d_theta = 0;
  std::size_t depth = 0;
  double j_star = 0.0;
};

struct SweepSettings {
  BehaviorPolicySpec behavior;
  TrainConfig train;
  std::vector<std::size_t> n_grid;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 1;
  bool stochastic = false;  // evaluate the learned policy's full distribution instead of its argmax
};

/// Checks the grid shape (strictly increasing, at least 4 points, at least
/// 1.5 decades) and seed count; throws ConfigError otherwise.
void validate_sweep(const SweepSettings& settings);

ScalingReport scaling_sweep(const CmdpSpec& env, const SweepSettings& settings);

}  // namespace lexisafe
