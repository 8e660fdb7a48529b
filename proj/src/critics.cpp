#include "lexisafe/critics.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "lexisafe/errors.hpp"

namespace lexisafe {

void ExpectileParams::validate() const {
  if (!(xi_reward > 0.5 && xi_reward < 1.0)) throw ConfigError("xi_reward must lie strictly inside (0.5, 1)");
  if (!(xi_cost > 0.5 && xi_cost < 1.0)) throw ConfigError("xi_cost must lie strictly inside (0.5, 1)");
}

double expectile_loss(double u, double xi) { return (u < 0.0 ? 1.0 - xi : xi) * u * u; }

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  const auto b = static_cast<Eigen::Index>(indices.size());
  const auto obs_dim = static_cast<Eigen::Index>(ds.header.obs_dim);
  const auto n_actions = static_cast<Eigen::Index>(ds.header.n_actions);
  const auto n_costs = static_cast<Eigen::Index>(ds.header.n_costs);
  Batch batch;
  batch.obs.resize(obs_dim, b);
  batch.next_obs.resize(obs_dim, b);
  batch.obs_action = Eigen::MatrixXd::Zero(obs_dim + n_actions, b);
  batch.reward.resize(b);
  batch.costs.resize(n_costs, b);
  batch.not_done.resize(b);
  batch.actions.resize(indices.size());
  batch.indices.assign(indices.begin(), indices.end());
  for (Eigen::Index k = 0; k < b; ++k) {
    const std::size_t i = indices[static_cast<std::size_t>(k)];
    const auto o = ds.obs_row(i);
    const auto no = ds.next_obs_row(i);
    for (Eigen::Index d = 0; d < obs_dim; ++d) {
      batch.obs(d, k) = o[static_cast<std::size_t>(d)];
      batch.next_obs(d, k) = no[static_cast<std::size_t>(d)];
      batch.obs_action(d, k) = o[static_cast<std::size_t>(d)];
    }
    const std::size_t a = ds.action[i];
    batch.actions[static_cast<std::size_t>(k)] = a;
    batch.obs_action(obs_dim + static_cast<Eigen::Index>(a), k) = 1.0;
    batch.reward(k) = ds.reward[i];
    for (Eigen::Index j = 0; j < n_costs; ++j) batch.costs(j, k) = ds.cost(i, static_cast<std::size_t>(j));
    batch.not_done(k) = ds.done[i] ? 0.0 : 1.0;
  }
  return batch;
}

CriticSet make_critic_set(std::size_t obs_dim, std::size_t n_actions, std::size_t n_costs,
                          const std::vector<std::size_t>& hidden_dims, Activation activation, double lr_q, double lr_v,
                          std::uint64_t seed) {
  CriticSet set;
  set.obs_dim = obs_dim;
  set.n_actions = n_actions;
  set.q_spec = MlpSpec{obs_dim + n_actions, hidden_dims, 1, activation};
  set.v_spec = MlpSpec{obs_dim, hidden_dims, 1, activation};
  set.q_spec.validate();
  set.v_spec.validate();

  auto make_nets = [&](const std::string& name) {
    CriticNets nets;
    RngStream q_rng(seed, "critic." + name + ".q");
    RngStream v_rng(seed, "critic." + name + ".v");
    nets.q = init_params(set.q_spec, q_rng);
    nets.q_target = nets.q;
    nets.v = init_params(set.v_spec, v_rng);
    nets.q_opt = AdamState::for_params(nets.q.size(), lr_q);
    nets.v_opt = AdamState::for_params(nets.v.size(), lr_v);
    return nets;
  };
  set.reward = make_nets("reward");
  for (std::size_t j = 0; j < n_costs; ++j) set.cost.push_back(make_nets("cost" + std::to_string(j)));
  return set;
}

namespace {

[[noreturn]] void abort_non_finite(const char* what, std::size_t step, const Batch& batch) {
  std::ostringstream msg;
  msg << "non-finite " << what << " at step " << step << "; batch rows:";
  const std::size_t shown = std::min<std::size_t>(batch.indices.size(), 16);
  for (std::size_t k = 0; k < shown; ++k) msg << ' ' << batch.indices[k];
  if (shown < batch.indices.size()) msg << " ...";
  throw NumericalError(msg.str());
}

}  // namespace

CriticLosses update_critic_pair(const CriticSet& shapes, CriticNets& nets, const Batch& batch,
                                const Eigen::RowVectorXd& signal, double gamma, double xi, double tau,
                                std::size_t step) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  CriticLosses losses;

  // Q step: regress onto signal + gamma * V(s') * (1 - done).
  const Eigen::RowVectorXd v_next = forward_batch(shapes.v_spec, nets.v, batch.next_obs).row(0);
  const Eigen::RowVectorXd target = signal + gamma * batch.not_done.cwiseProduct(v_next);
  ForwardCache q_cache;
  const Eigen::RowVectorXd q = forward_batch(shapes.q_spec, nets.q, batch.obs_action, &q_cache).row(0);
  const Eigen::RowVectorXd diff = q - target;
  losses.q_loss = diff.squaredNorm() * inv_b;
  losses.q_min = q.minCoeff();
  losses.q_max = q.maxCoeff();
  if (!std::isfinite(losses.q_loss)) abort_non_finite("Q loss", step, batch);
  std::vector<double> q_grad(nets.q.size());
  backward_batch(shapes.q_spec, nets.q, q_cache, 2.0 * inv_b * diff, q_grad);
  adam_step(nets.q_opt, nets.q, q_grad);

  // V step: expectile regression towards the target Q.
  const Eigen::RowVectorXd q_t = forward_batch(shapes.q_spec, nets.q_target, batch.obs_action).row(0);
  ForwardCache v_cache;
  const Eigen::RowVectorXd v = forward_batch(shapes.v_spec, nets.v, batch.obs, &v_cache).row(0);
  Eigen::RowVectorXd v_out_grad(v.size());
  double v_loss = 0.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double u = q_t(k) - v(k);
    const double weight = u < 0.0 ? 1.0 - xi : xi;
    v_loss += weight * u * u;
    v_out_grad(k) = -2.0 * weight * u * inv_b;
  }
  losses.v_loss = v_loss * inv_b;
  if (!std::isfinite(losses.v_loss)) abort_non_finite("V loss", step, batch);
  std::vector<double> v_grad(nets.v.size());
  backward_batch(shapes.v_spec, nets.v, v_cache, v_out_grad, v_grad);
  adam_step(nets.v_opt, nets.v, v_grad);

  soft_update(nets.q_target, nets.q, tau);
  return losses;
}

CriticLosses update_reward_critics(CriticSet& critics, const Batch& batch, const CriticUpdateParams& params) {
  return update_critic_pair(critics, critics.reward, batch, batch.reward, params.gamma, params.expectiles.xi_reward,
                            params.target_tau, params.step);
}

CriticLosses update_cost_critics(CriticSet& critics, const Batch& batch, const CriticUpdateParams& params,
                                 std::size_t j) {
  if (j >= critics.cost.size()) throw ConfigError("update_cost_critics: cost index out of range");
  return update_critic_pair(critics, critics.cost[j], batch, batch.costs.row(static_cast<Eigen::Index>(j)),
                            params.gamma, params.expectiles.xi_cost, params.target_tau, params.step);
}

double q_value(const CriticSet& critics, std::span<const double> obs, std::size_t action, Channel ch) {
  if (obs.size() != critics.obs_dim || action >= critics.n_actions) throw UsageError("q_value: bad obs/action");
  std::vector<double> input(obs.begin(), obs.end());
  input.resize(critics.obs_dim + critics.n_actions, 0.0);
  input[critics.obs_dim + action] = 1.0;
  return forward(critics.q_spec, critics.nets(ch).q, input)(0);
}

double v_value(const CriticSet& critics, std::span<const double> obs, Channel ch) {
  return forward(critics.v_spec, critics.nets(ch).v, obs)(0);
}

double advantage(const CriticSet& critics, std::span<const double> obs, std::size_t action, Channel ch) {
  return q_value(critics, obs, action, ch) - v_value(critics, obs, ch);
}

Eigen::RowVectorXd batch_q(const CriticSet& critics, const Batch& batch, Channel ch) {
  return forward_batch(critics.q_spec, critics.nets(ch).q, batch.obs_action).row(0);
}

Eigen::RowVectorXd batch_v(const CriticSet& critics, const Batch& batch, Channel ch) {
  return forward_batch(critics.v_spec, critics.nets(ch).v, batch.obs).row(0);
}

Eigen::RowVectorXd batch_advantage(const CriticSet& critics, const Batch& batch, Channel ch) {
  return batch_q(critics, batch, ch) - batch_v(critics, batch, ch);
}

}  // namespace lexisafe
