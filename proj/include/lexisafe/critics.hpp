#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lexisafe/approximator.hpp"
#include "lexisafe/dataset.hpp"

namespace lexisafe {

/// Selects the reward signal or one cost channel.
struct Channel {
  bool is_reward = true;
  std::size_t index = 0;

  static Channel reward() { return {true, 0}; }
  static Channel cost(std::size_t j) { return {false, j}; }
  bool operator==(const Channel&) const = default;
};

struct ExpectileParams {
  double xi_reward = 0.7;
  double xi_cost = 0.7;

  void validate() const;
};

/// Asymmetric squared loss |xi - 1(u < 0)| * u^2.
double expectile_loss(double u, double xi);

/// Dense minibatch assembled from dataset rows; column k is transition k.
struct Batch {
  Eigen::MatrixXd obs;         // obs_dim x B
  Eigen::MatrixXd next_obs;    // obs_dim x B
  Eigen::MatrixXd obs_action;  // (obs_dim + n_actions) x B, action one-hot appended
  Eigen::RowVectorXd reward;
  Eigen::MatrixXd costs;       // n_costs x B
  Eigen::RowVectorXd not_done;
  std::vector<std::size_t> actions;
  std::vector<std::size_t> indices;

  std::size_t size() const { return actions.size(); }
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

/// Online Q with its soft-updated target copy and an online V.
struct CriticNets {
  ParamVector q;
  ParamVector q_target;
  ParamVector v;
  AdamState q_opt;
  AdamState v_opt;
};

struct CriticSet {
  MlpSpec q_spec;  // obs_dim + n_actions -> 1
  MlpSpec v_spec;  // obs_dim -> 1
  std::size_t obs_dim = 0;
  std::size_t n_actions = 0;
  CriticNets reward;
  std::vector<CriticNets> cost;

  CriticNets& nets(Channel ch) { return ch.is_reward ? reward : cost.at(ch.index); }
  const CriticNets& nets(Channel ch) const { return ch.is_reward ? reward : cost.at(ch.index); }
};

CriticSet make_critic_set(std::size_t obs_dim, std::size_t n_actions, std::size_t n_costs,
                          const std::vector<std::size_t>& hidden_dims, Activation activation, double lr_q, double lr_v,
                          std::uint64_t seed);

struct CriticUpdateParams {
  double gamma = 0.995;
  ExpectileParams expectiles;
  double target_tau = 0.005;
  std::size_t step = 0;  // for diagnostics only
};

/// Pre-step losses and the range of the online Q predictions on the batch.
struct CriticLosses {
  double q_loss = 0.0;
  double v_loss = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
};

/// One step on the squared Bellman loss for Q (bootstrapping through the
/// online V, masked by done), one step on the expectile loss for V against
/// the target Q, then a soft update of the target Q.
CriticLosses update_critic_pair(const CriticSet& shapes, CriticNets& nets, const Batch& batch,
                                const Eigen::RowVectorXd& signal, double gamma, double xi, double tau,
                                std::size_t step);

CriticLosses update_reward_critics(CriticSet& critics, const Batch& batch, const CriticUpdateParams& params);
CriticLosses update_cost_critics(CriticSet& critics, const Batch& batch, const CriticUpdateParams& params,
                                 std::size_t j);

double q_value(const CriticSet& critics, std::span<const double> obs, std::size_t action, Channel ch);
double v_value(const CriticSet& critics, std::span<const double> obs, Channel ch);
/// Q(s, a) - V(s) from the online networks.
double advantage(const CriticSet& critics, std::span<const double> obs, std::size_t action, Channel ch);

Eigen::RowVectorXd batch_q(const CriticSet& critics, const Batch& batch, Channel ch);
Eigen::RowVectorXd batch_v(const CriticSet& critics, const Batch& batch, Channel ch);
Eigen::RowVectorXd batch_advantage(const CriticSet& critics, const Batch& batch, Channel ch);

}  // namespace lexisafe
