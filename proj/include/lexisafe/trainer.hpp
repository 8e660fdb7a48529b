#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lexisafe/approximator.hpp"
#include "lexisafe/checkpoint.hpp"
#include "lexisafe/critics.hpp"
#include "lexisafe/dataset.hpp"
#include "lexisafe/environment.hpp"
#include "lexisafe/rng.hpp"

namespace lexisafe {

enum class ScheduleMode { interleaved, staged };
enum class TrainMode { sc, mc, weighted };

const char* to_string(ScheduleMode mode);
const char* to_string(TrainMode mode);
ScheduleMode schedule_mode_from_string(const std::string& name);
TrainMode train_mode_from_string(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::sc;
  double gamma = 0.995;
  std::vector<double> cost_thresholds{1.0};  // kappa_j, indexed by cost channel
  std::vector<double> beta_c;                // per phase; empty means 1 for every phase
  double beta_r = 1.0;
  ExpectileParams expectiles;
  double lr_actor = 3e-4;
  double lr_q = 3e-5;
  double lr_v = 3e-5;
  double lr_lambda = 1e-4;
  std::size_t batch_size = 2048;
  std::size_t total_steps = 50000;
  double smoothing_alpha = 0.05;
  double target_tau = 0.005;
  double kl_tolerance = 0.1;
  double weight_clip_max = 100.0;
  double lambda_init = 0.0;
  ScheduleMode schedule_mode = ScheduleMode::interleaved;
  std::vector<std::size_t> staged_phase_steps;  // empty selects the default split
  std::vector<std::size_t> priority;            // cost channel handled by each cost phase; empty means 0, 1, ...
  std::vector<double> baseline_weights;         // weighted-IQL penalty per channel
  std::vector<std::size_t> hidden_dims{128, 128};
  Activation activation = Activation::relu;
  std::uint64_t seed = 7;

  /// Throws ConfigError when the config cannot drive an n_costs-channel run.
  void validate(std::size_t n_costs) const;

  std::size_t n_phases(std::size_t n_costs) const { return n_costs + 1; }
  double beta_c_for_phase(std::size_t phase) const { return beta_c.empty() ? 1.0 : beta_c.at(phase); }
  std::size_t channel_for_phase(std::size_t phase) const { return priority.empty() ? phase : priority.at(phase); }
  /// Per-phase step budgets, expanding the 40/30/30 and 50/50 defaults.
  std::vector<std::size_t> phase_budgets(std::size_t n_costs) const;
};

struct PolicyHead {
  MlpSpec spec;  // obs_dim -> n_actions logits
  ParamVector params;

  std::size_t n_actions() const { return spec.output_dim; }
  std::vector<double> probabilities(std::span<const double> obs) const;
  /// Argmax of the logits, ties resolved towards the lowest action index.
  std::size_t greedy_action(std::span<const double> obs) const;
  std::size_t sample_action(std::span<const double> obs, RngStream& rng) const;

  Checkpoint to_checkpoint() const;
  static PolicyHead from_checkpoint(const Checkpoint& ckpt);
  bool operator==(const PolicyHead&) const = default;
};

struct TrainState {
  PolicyHead policy;
  std::vector<AdamState> actor_opt;  // one per phase, reward phase last
  std::vector<double> lambdas;
  std::vector<double> smoothed_costs;
  std::vector<std::uint8_t> smoothed_ready;
  std::size_t step = 0;
  RngStream batch_rng;
  CriticSet critics;
  double reward_value_bound = 0.0;  // r_m / (1 - gamma)
  double cost_value_bound = 0.0;    // c_m / (1 - gamma)
};

/// Builds networks and optimizers. Only dimensions and the per-step bounds
/// r_m, c_m are taken from env; nothing else about the dynamics is used.
TrainState make_train_state(const CmdpSpec& env, const TrainConfig& config);

struct StepMetrics {
  std::size_t step = 0;
  int phase = -1;  // scheduled phase in staged mode, -1 when interleaved
  CriticLosses reward_critic;
  std::vector<CriticLosses> cost_critic;
  std::vector<double> cost_policy_loss;  // per phase, NaN when the phase did not step
  double reward_policy_loss = 0.0;       // NaN when the reward phase did not step
  std::vector<double> lambdas;
  std::vector<double> smoothed_costs;
  double weight_max = 0.0;
  bool critic_in_range = true;
};

double awr_weight_cost(double adv_c, double beta_c, double clip);
double awr_weight_reward(double adv_r, std::span<const double> adv_c, double beta_r, std::span<const double> lambdas,
                         double clip);

/// One Adam step on mean(-w * log pi(a|s)) over the batch's dataset actions.
/// Returns the pre-step loss; throws NumericalError if it is not finite.
double policy_nll_step(PolicyHead& policy, AdamState& opt, const Batch& batch, const Eigen::RowVectorXd& weights,
                       std::size_t step);

/// One actor step on mean(-w * log pi(a|s)) over the batch's dataset actions
/// using the phase's optimizer. Returns the pre-step loss.
double weighted_nll_step(TrainState& state, std::size_t phase, const Batch& batch, const Eigen::RowVectorXd& weights,
                         std::size_t step);

double policy_loss_cost(TrainState& state, const Batch& batch, std::size_t phase, const TrainConfig& config,
                        double* weight_max = nullptr);
double policy_loss_reward(TrainState& state, const Batch& batch, const TrainConfig& config,
                          double* weight_max = nullptr);

double lambda_update(TrainState& state, std::size_t j, double cost_estimate, const TrainConfig& config);
double smooth_cost_estimate(TrainState& state, std::size_t j, const Batch& batch, const TrainConfig& config);

/// Phase whose actor step runs at `step`; the reward phase is n_costs.
std::size_t scheduled_phase(const TrainConfig& config, std::size_t n_costs, std::size_t step);
bool phase_active(const TrainConfig& config, std::size_t n_costs, std::size_t step, std::size_t phase);

StepMetrics train_step_sc(TrainState& state, const Dataset& ds, const TrainConfig& config);
StepMetrics train_step_mc(TrainState& state, const Dataset& ds, const TrainConfig& config);
StepMetrics train_step_weighted_baseline(TrainState& state, const Dataset& ds, const TrainConfig& config);
/// Dispatches on config.mode.
StepMetrics train_step(TrainState& state, const Dataset& ds, const TrainConfig& config);

PolicyHead extract_policy(const TrainState& state);

/// Called after every step; returning false stops training early.
using StepCallback = std::function<bool(const TrainState&, const StepMetrics&)>;

/// Runs config.total_steps steps from a fresh state.
TrainState run_training(const CmdpSpec& env, const Dataset& ds, const TrainConfig& config,
                        const StepCallback& on_step = {});

/// Full train state (policy, critics, lambdas) as a checkpoint.
Checkpoint train_state_checkpoint(const TrainState& state);

}  // namespace lexisafe
