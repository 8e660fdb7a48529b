#include "lexisafe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lexisafe/errors.hpp"

namespace lexisafe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// exp(-700) is still a normal double, so weights never underflow to zero.
constexpr double kMinLogWeight = -700.0;

double clipped_exp(double exponent, double clip) { return std::min(std::exp(std::max(exponent, kMinLogWeight)), clip); }

}  // namespace

const char* to_string(ScheduleMode mode) { return mode == ScheduleMode::staged ? "staged" : "interleaved"; }

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::sc:
      return "sc";
    case TrainMode::mc:
      return "mc";
    case TrainMode::weighted:
      return "weighted";
  }
  return "sc";
}

ScheduleMode schedule_mode_from_string(const std::string& name) {
  if (name == "interleaved") return ScheduleMode::interleaved;
  if (name == "staged") return ScheduleMode::staged;
  throw ConfigError("unknown schedule_mode '" + name + "' (expected interleaved or staged)");
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "sc") return TrainMode::sc;
  if (name == "mc") return TrainMode::mc;
  if (name == "weighted") return TrainMode::weighted;
  throw ConfigError("unknown mode '" + name + "' (expected sc, mc or weighted)");
}

void TrainConfig::validate(std::size_t n_costs) const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (cost_thresholds.size() != n_costs) {
    throw ConfigError("cost_thresholds needs " + std::to_string(n_costs) + " entries, got " +
                      std::to_string(cost_thresholds.size()));
  }
  for (double k : cost_thresholds) {
    if (!(k > 0.0)) throw ConfigError("cost thresholds must be positive");
  }
  if (!beta_c.empty() && beta_c.size() != n_costs) throw ConfigError("beta_c needs one entry per cost phase");
  for (double b : beta_c) {
    if (!(b >= 0.0)) throw ConfigError("beta_c must be non-negative");
  }
  if (!(beta_r >= 0.0)) throw ConfigError("beta_r must be non-negative");
  expectiles.validate();
  for (double lr : {lr_actor, lr_q, lr_v, lr_lambda}) {
    if (!(lr > 0.0)) throw ConfigError("learning rates must be positive");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(smoothing_alpha >= 0.0 && smoothing_alpha <= 1.0)) throw ConfigError("smoothing_alpha must lie in [0, 1]");
  if (!(target_tau > 0.0 && target_tau <= 1.0)) throw ConfigError("target_tau must lie in (0, 1]");
  if (!(weight_clip_max > 0.0)) throw ConfigError("weight_clip_max must be positive");
  if (!(kl_tolerance >= 0.0)) throw ConfigError("kl_tolerance must be non-negative");
  if (!(lambda_init >= 0.0)) throw ConfigError("lambda_init must be non-negative");
  if (schedule_mode == ScheduleMode::staged && !staged_phase_steps.empty() &&
      staged_phase_steps.size() != n_costs + 1) {
    throw ConfigError("staged_phase_steps needs n_costs + 1 = " + std::to_string(n_costs + 1) + " entries");
  }
  if (!priority.empty()) {
    std::vector<std::size_t> sorted = priority;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> expected(n_costs);
    std::iota(expected.begin(), expected.end(), std::size_t{0});
    if (sorted != expected) throw ConfigError("priority must be a permutation of the cost channels");
  }
  if (mode == TrainMode::sc && n_costs != 1) throw ConfigError("mode sc requires exactly one cost channel");
  if (mode == TrainMode::weighted) {
    if (baseline_weights.size() != n_costs) throw ConfigError("baseline_weights needs one entry per cost channel");
    for (double w : baseline_weights) {
      if (!(w >= 0.0)) throw ConfigError("baseline_weights must be non-negative");
    }
  }
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden_dims entries must be positive");
  }
}

std::vector<std::size_t> TrainConfig::phase_budgets(std::size_t n_costs) const {
  if (!staged_phase_steps.empty()) return staged_phase_steps;
  const std::size_t k = n_costs + 1;
  std::vector<std::size_t> budgets(k);
  if (k == 3) {
    budgets[0] = total_steps * 4 / 10;
    budgets[1] = total_steps * 3 / 10;
  } else {
    for (std::size_t p = 0; p + 1 < k; ++p) budgets[p] = total_steps / k;
  }
  budgets[k - 1] = total_steps - std::accumulate(budgets.begin(), budgets.end() - 1, std::size_t{0});
  return budgets;
}

std::vector<double> PolicyHead::probabilities(std::span<const double> obs) const {
  const Eigen::VectorXd logits = forward(spec, params, obs);
  const double top = logits.maxCoeff();
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (Eigen::Index a = 0; a < logits.size(); ++a) {
    p[static_cast<std::size_t>(a)] = std::exp(logits(a) - top);
    total += p[static_cast<std::size_t>(a)];
  }
  for (double& x : p) x /= total;
  return p;
}

std::size_t PolicyHead::greedy_action(std::span<const double> obs) const {
  const Eigen::VectorXd logits = forward(spec, params, obs);
  std::size_t best = 0;
  for (Eigen::Index a = 1; a < logits.size(); ++a) {
    if (logits(a) > logits(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(a);
  }
  return best;
}

std::size_t PolicyHead::sample_action(std::span<const double> obs, RngStream& rng) const {
  const auto p = probabilities(obs);
  return rng.categorical(p);
}

Checkpoint PolicyHead::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.kind = "policy";
  ckpt.networks.push_back({"policy", spec, params});
  return ckpt;
}

PolicyHead PolicyHead::from_checkpoint(const Checkpoint& ckpt) {
  const NamedNetwork& net = ckpt.network("policy");
  return PolicyHead{net.spec, net.params};
}

TrainState make_train_state(const CmdpSpec& env, const TrainConfig& config) {
  config.validate(env.n_costs);
  const std::size_t k = config.n_phases(env.n_costs);
  MlpSpec policy_spec{env.obs_dim(), config.hidden_dims, env.n_actions, config.activation};
  RngStream init_rng(config.seed, "policy.init");
  TrainState state{
      .policy = PolicyHead{policy_spec, init_params(policy_spec, init_rng)},
      .actor_opt = {},
      .lambdas = std::vector<double>(env.n_costs, config.lambda_init),
      .smoothed_costs = std::vector<double>(env.n_costs, 0.0),
      .smoothed_ready = std::vector<std::uint8_t>(env.n_costs, 0),
      .step = 0,
      .batch_rng = RngStream(config.seed, "minibatch"),
      .critics = make_critic_set(env.obs_dim(), env.n_actions, env.n_costs, config.hidden_dims, config.activation,
                                 config.lr_q, config.lr_v, config.seed),
      .reward_value_bound = env.r_max_bound / (1.0 - config.gamma),
      .cost_value_bound = env.c_max_bound / (1.0 - config.gamma),
  };
  for (std::size_t p = 0; p < k; ++p) {
    state.actor_opt.push_back(AdamState::for_params(state.policy.params.size(), config.lr_actor));
  }
  return state;
}

double awr_weight_cost(double adv_c, double beta_c, double clip) { return clipped_exp(-beta_c * adv_c, clip); }

double awr_weight_reward(double adv_r, std::span<const double> adv_c, double beta_r, std::span<const double> lambdas,
                         double clip) {
  double exponent = beta_r * adv_r;
  for (std::size_t j = 0; j < adv_c.size(); ++j) exponent -= lambdas[j] * adv_c[j];
  return clipped_exp(exponent, clip);
}

double policy_nll_step(PolicyHead& policy, AdamState& opt, const Batch& batch, const Eigen::RowVectorXd& weights,
                       std::size_t step) {
  ForwardCache cache;
  const Eigen::MatrixXd logits = forward_batch(policy.spec, policy.params, batch.obs, &cache);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Eigen::MatrixXd out_grad(logits.rows(), logits.cols());
  double loss = 0.0;
  for (Eigen::Index k = 0; k < logits.cols(); ++k) {
    const double top = logits.col(k).maxCoeff();
    const Eigen::VectorXd e = (logits.col(k).array() - top).exp();
    const double z = e.sum();
    const auto a = static_cast<Eigen::Index>(batch.actions[static_cast<std::size_t>(k)]);
    const double log_p = logits(a, k) - top - std::log(z);
    loss -= weights(k) * log_p;
    out_grad.col(k) = (weights(k) * inv_b / z) * e;
    out_grad(a, k) -= weights(k) * inv_b;
  }
  loss *= inv_b;
  if (!std::isfinite(loss)) throw NumericalError("non-finite policy loss at step " + std::to_string(step));
  std::vector<double> grad(policy.params.size());
  backward_batch(policy.spec, policy.params, cache, out_grad, grad);
  adam_step(opt, policy.params, grad);
  return loss;
}

double weighted_nll_step(TrainState& state, std::size_t phase, const Batch& batch, const Eigen::RowVectorXd& weights,
                         std::size_t step) {
  return policy_nll_step(state.policy, state.actor_opt.at(phase), batch, weights, step);
}

double policy_loss_cost(TrainState& state, const Batch& batch, std::size_t phase, const TrainConfig& config,
                        double* weight_max) {
  const std::size_t ch = config.channel_for_phase(phase);
  const Eigen::RowVectorXd adv = batch_advantage(state.critics, batch, Channel::cost(ch));
  const double beta = config.beta_c_for_phase(phase);
  Eigen::RowVectorXd w(adv.size());
  for (Eigen::Index k = 0; k < adv.size(); ++k) w(k) = awr_weight_cost(adv(k), beta, config.weight_clip_max);
  if (weight_max) *weight_max = std::max(*weight_max, w.maxCoeff());
  return weighted_nll_step(state, phase, batch, w, state.step);
}

double policy_loss_reward(TrainState& state, const Batch& batch, const TrainConfig& config, double* weight_max) {
  const std::size_t n_costs = state.lambdas.size();
  const Eigen::RowVectorXd adv_r = batch_advantage(state.critics, batch, Channel::reward());
  std::vector<Eigen::RowVectorXd> adv_c;
  for (std::size_t j = 0; j < n_costs; ++j) adv_c.push_back(batch_advantage(state.critics, batch, Channel::cost(j)));
  Eigen::RowVectorXd w(adv_r.size());
  std::vector<double> a_c(n_costs);
  for (Eigen::Index k = 0; k < adv_r.size(); ++k) {
    for (std::size_t j = 0; j < n_costs; ++j) a_c[j] = adv_c[j](k);
    w(k) = awr_weight_reward(adv_r(k), a_c, config.beta_r, state.lambdas, config.weight_clip_max);
  }
  if (weight_max) *weight_max = std::max(*weight_max, w.maxCoeff());
  return weighted_nll_step(state, n_costs, batch, w, state.step);
}

double lambda_update(TrainState& state, std::size_t j, double cost_estimate, const TrainConfig& config) {
  double& lambda = state.lambdas.at(j);
  lambda = std::max(0.0, lambda + config.lr_lambda * (cost_estimate - config.cost_thresholds.at(j)));
  return lambda;
}

double smooth_cost_estimate(TrainState& state, std::size_t j, const Batch& batch, const TrainConfig& config) {
  const double raw = batch_v(state.critics, batch, Channel::cost(j)).mean();
  const double estimate = std::clamp(raw, 0.0, state.cost_value_bound);
  double& smoothed = state.smoothed_costs.at(j);
  if (!state.smoothed_ready.at(j)) {
    smoothed = estimate;
    state.smoothed_ready[j] = 1;
  } else {
    smoothed = (1.0 - config.smoothing_alpha) * smoothed + config.smoothing_alpha * estimate;
  }
  return smoothed;
}

std::size_t scheduled_phase(const TrainConfig& config, std::size_t n_costs, std::size_t step) {
  const auto budgets = config.phase_budgets(n_costs);
  std::size_t end = 0;
  for (std::size_t p = 0; p < budgets.size(); ++p) {
    end += budgets[p];
    if (step < end) return p;
  }
  return n_costs;
}

bool phase_active(const TrainConfig& config, std::size_t n_costs, std::size_t step, std::size_t phase) {
  return config.schedule_mode == ScheduleMode::interleaved || scheduled_phase(config, n_costs, step) == phase;
}

namespace {

struct StepContext {
  Batch batch;
  CriticUpdateParams critic_params;
  StepMetrics metrics;
};

StepContext begin_step(TrainState& state, const Dataset& ds, const TrainConfig& config) {
  const std::size_t n_costs = state.lambdas.size();
  if (ds.header.n_costs != n_costs || ds.header.obs_dim != state.critics.obs_dim ||
      ds.header.n_actions != state.critics.n_actions) {
    throw DataError(DataErrorKind::dims_mismatch, "dataset dimensions do not match the train state");
  }
  StepContext ctx;
  const auto idx = sample_minibatch(ds, config.batch_size, state.batch_rng);
  ctx.batch = make_batch(ds, idx);
  ctx.critic_params = CriticUpdateParams{config.gamma, config.expectiles, config.target_tau, state.step};
  ctx.metrics.step = state.step;
  ctx.metrics.phase = config.schedule_mode == ScheduleMode::staged
                          ? static_cast<int>(scheduled_phase(config, n_costs, state.step))
                          : -1;
  ctx.metrics.cost_critic.assign(n_costs, CriticLosses{});
  ctx.metrics.cost_policy_loss.assign(n_costs, kNaN);
  ctx.metrics.reward_policy_loss = kNaN;
  return ctx;
}

bool in_range(const CriticLosses& l, double bound) { return l.q_min >= -0.1 && l.q_max <= bound + 0.1; }

StepMetrics finish_step(TrainState& state, StepContext& ctx, bool check_reward_range) {
  StepMetrics& m = ctx.metrics;
  m.lambdas = state.lambdas;
  m.smoothed_costs = state.smoothed_costs;
  m.critic_in_range = !check_reward_range || in_range(m.reward_critic, state.reward_value_bound);
  for (const auto& l : m.cost_critic) m.critic_in_range = m.critic_in_range && in_range(l, state.cost_value_bound);
  ++state.step;
  return std::move(m);
}

}  // namespace

StepMetrics train_step_sc(TrainState& state, const Dataset& ds, const TrainConfig& config) {
  if (state.lambdas.size() != 1) throw ConfigError("train_step_sc requires exactly one cost channel");
  StepContext ctx = begin_step(state, ds, config);
  StepMetrics& m = ctx.metrics;
  m.cost_critic[0] = update_cost_critics(state.critics, ctx.batch, ctx.critic_params, 0);
  m.reward_critic = update_reward_critics(state.critics, ctx.batch, ctx.critic_params);
  if (phase_active(config, 1, state.step, 0)) {
    m.cost_policy_loss[0] = policy_loss_cost(state, ctx.batch, 0, config, &m.weight_max);
  }
  const double c = smooth_cost_estimate(state, 0, ctx.batch, config);
  lambda_update(state, 0, c, config);
  if (phase_active(config, 1, state.step, 1)) {
    m.reward_policy_loss = policy_loss_reward(state, ctx.batch, config, &m.weight_max);
  }
  return finish_step(state, ctx, true);
}

StepMetrics train_step_mc(TrainState& state, const Dataset& ds, const TrainConfig& config) {
  const std::size_t n_costs = state.lambdas.size();
  StepContext ctx = begin_step(state, ds, config);
  StepMetrics& m = ctx.metrics;
  m.reward_critic = update_reward_critics(state.critics, ctx.batch, ctx.critic_params);
  for (std::size_t j = 0; j < n_costs; ++j) {
    m.cost_critic[j] = update_cost_critics(state.critics, ctx.batch, ctx.critic_params, j);
  }
  std::vector<double> smoothed(n_costs);
  for (std::size_t j = 0; j < n_costs; ++j) smoothed[j] = smooth_cost_estimate(state, j, ctx.batch, config);
  for (std::size_t p = 0; p < n_costs; ++p) {
    const std::size_t ch = config.channel_for_phase(p);
    lambda_update(state, ch, smoothed[ch], config);
    if (phase_active(config, n_costs, state.step, p)) {
      m.cost_policy_loss[p] = policy_loss_cost(state, ctx.batch, p, config, &m.weight_max);
    }
  }
  if (phase_active(config, n_costs, state.step, n_costs)) {
    m.reward_policy_loss = policy_loss_reward(state, ctx.batch, config, &m.weight_max);
  }
  return finish_step(state, ctx, true);
}

StepMetrics train_step_weighted_baseline(TrainState& state, const Dataset& ds, const TrainConfig& config) {
  const std::size_t n_costs = state.lambdas.size();
  if (config.baseline_weights.size() != n_costs) throw ConfigError("baseline_weights needs one entry per cost channel");
  StepContext ctx = begin_step(state, ds, config);
  StepMetrics& m = ctx.metrics;
  Eigen::RowVectorXd shaped = ctx.batch.reward;
  for (std::size_t j = 0; j < n_costs; ++j) {
    shaped -= config.baseline_weights[j] * ctx.batch.costs.row(static_cast<Eigen::Index>(j));
  }
  m.reward_critic = update_critic_pair(state.critics, state.critics.reward, ctx.batch, shaped, config.gamma,
                                       config.expectiles.xi_reward, config.target_tau, state.step);
  const Eigen::RowVectorXd adv = batch_advantage(state.critics, ctx.batch, Channel::reward());
  Eigen::RowVectorXd w(adv.size());
  for (Eigen::Index k = 0; k < adv.size(); ++k) w(k) = awr_weight_reward(adv(k), {}, config.beta_r, {}, config.weight_clip_max);
  m.weight_max = w.maxCoeff();
  m.reward_policy_loss = weighted_nll_step(state, n_costs, ctx.batch, w, state.step);
  // Cost critics are not trained by the baseline, and the shaped reward may
  // be negative, so no range check applies.
  m.cost_critic.assign(n_costs, CriticLosses{kNaN, kNaN, 0.0, 0.0});
  return finish_step(state, ctx, false);
}

StepMetrics train_step(TrainState& state, const Dataset& ds, const TrainConfig& config) {
  switch (config.mode) {
    case TrainMode::sc:
      return train_step_sc(state, ds, config);
    case TrainMode::mc:
      return train_step_mc(state, ds, config);
    case TrainMode::weighted:
      return train_step_weighted_baseline(state, ds, config);
  }
  throw ConfigError("unknown training mode");
}

PolicyHead extract_policy(const TrainState& state) { return state.policy; }

TrainState run_training(const CmdpSpec& env, const Dataset& ds, const TrainConfig& config, const StepCallback& on_step) {
  check_dataset_matches(ds, env);
  TrainState state = make_train_state(env, config);
  for (std::size_t s = 0; s < config.total_steps; ++s) {
    const StepMetrics m = train_step(state, ds, config);
    if (on_step && !on_step(state, m)) break;
  }
  return state;
}

Checkpoint train_state_checkpoint(const TrainState& state) {
  Checkpoint ckpt;
  ckpt.kind = "train_state";
  ckpt.networks.push_back({"policy", state.policy.spec, state.policy.params});
  auto add_critics = [&](const std::string& prefix, const CriticNets& nets) {
    ckpt.networks.push_back({prefix + ".q", state.critics.q_spec, nets.q});
    ckpt.networks.push_back({prefix + ".q_target", state.critics.q_spec, nets.q_target});
    ckpt.networks.push_back({prefix + ".v", state.critics.v_spec, nets.v});
  };
  add_critics("critic.reward", state.critics.reward);
  for (std::size_t j = 0; j < state.critics.cost.size(); ++j) {
    add_critics("critic.cost" + std::to_string(j), state.critics.cost[j]);
  }
  ckpt.scalars.emplace_back("step", static_cast<double>(state.step));
  for (std::size_t j = 0; j < state.lambdas.size(); ++j) {
    ckpt.scalars.emplace_back("lambda_" + std::to_string(j), state.lambdas[j]);
    ckpt.scalars.emplace_back("smoothed_cost_" + std::to_string(j), state.smoothed_costs[j]);
  }
  return ckpt;
}

}  // namespace lexisafe
