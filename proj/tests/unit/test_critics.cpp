#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "lexisafe/critics.hpp"
#include "lexisafe/errors.hpp"

using namespace lexisafe;

namespace {

struct Fit {
  CriticSet critics;
  std::vector<CriticLosses> losses;
};

// Trains every critic pair of a fresh set on uniform minibatches.
Fit fit_critics(const Dataset& ds, double gamma, std::size_t steps, double lr, std::uint64_t seed = 1) {
  Fit f{make_critic_set(ds.header.obs_dim, ds.header.n_actions, ds.header.n_costs, {32, 32}, Activation::relu, lr,
                        lr, seed),
        {}};
  RngStream rng(seed, "batches");
  CriticUpdateParams params;
  params.gamma = gamma;
  params.target_tau = 0.05;
  for (std::size_t k = 0; k < steps; ++k) {
    const Batch batch = make_batch(ds, sample_minibatch(ds, std::min<std::size_t>(128, ds.size()), rng));
    params.step = k;
    f.losses.push_back(update_reward_critics(f.critics, batch, params));
    for (std::size_t j = 0; j < ds.header.n_costs; ++j) f.losses.push_back(update_cost_critics(f.critics, batch, params, j));
  }
  return f;
}

}  // namespace

TEST_CASE("expectile loss") {
  CHECK(expectile_loss(0.0, 0.9) == 0.0);
  CHECK(expectile_loss(2.0, 0.7) == doctest::Approx(2.8).epsilon(1e-15));
  CHECK(expectile_loss(-2.0, 0.7) == doctest::Approx(1.2).epsilon(1e-15));
  for (double u : {-3.0, -0.5, 0.25, 4.0}) {
    CHECK(expectile_loss(u, 0.5) == doctest::Approx(0.5 * u * u));
    if (u > 0) CHECK(expectile_loss(u, 0.8) > expectile_loss(u, 0.6));
    if (u < 0) CHECK(expectile_loss(u, 0.8) < expectile_loss(u, 0.6));
  }
}

TEST_CASE("expectiles must lie strictly inside (0.5, 1)") {
  CHECK_NOTHROW((ExpectileParams{0.7, 0.9}.validate()));
  CHECK_THROWS_AS((ExpectileParams{0.5, 0.7}.validate()), ConfigError);
  CHECK_THROWS_AS((ExpectileParams{0.7, 1.0}.validate()), ConfigError);
}

TEST_CASE("batch layout") {
  const CmdpSpec env = make_chain_hazard(6, 4.0, 0);
  const Dataset ds = generate_dataset(env, BehaviorPolicySpec{}, 3, 1);
  const std::vector<std::size_t> idx{0, 2};
  const Batch b = make_batch(ds, idx);
  CHECK(b.size() == 2);
  CHECK(b.obs_action.rows() == static_cast<Eigen::Index>(env.obs_dim() + env.n_actions));
  CHECK(b.obs_action(static_cast<Eigen::Index>(env.obs_dim() + ds.action[2]), 1) == 1.0);
  CHECK(b.not_done(0) == (ds.done[0] ? 0.0 : 1.0));
}

TEST_CASE("advantage is Q minus V and vanishes with zero output layers") {
  const CmdpSpec env = make_chain_hazard(6, 4.0, 0);
  CriticSet c = make_critic_set(env.obs_dim(), env.n_actions, 1, {8}, Activation::relu, 1e-3, 1e-3, 3);
  const auto obs = featurize(env, 2);
  CHECK(std::abs(advantage(c, obs, 1, Channel::reward()) -
                 (q_value(c, obs, 1, Channel::reward()) - v_value(c, obs, Channel::reward()))) < 1e-12);
  for (auto* p : {&c.reward.q, &c.reward.v}) {
    for (std::size_t i = p->size() - 9; i < p->size(); ++i) (*p)[i] = 0.0;  // output weights and bias
  }
  CHECK(advantage(c, obs, 1, Channel::reward()) == 0.0);
}

TEST_CASE("with gamma = 0 the Q critics regress onto the immediate tables") {
  ChainHazardParams p;
  p.length = 8;
  const CmdpSpec env = make_chain_hazard(p);
  const Dataset ds = generate_dataset(env, BehaviorPolicySpec{0.5, 1.0}, 400, 2);
  const Fit f = fit_critics(ds, 0.0, 3000, 3e-3);
  double err_r = 0.0, err_c = 0.0;
  for (std::size_t s = 0; s + 1 < env.n_states; ++s) {
    for (std::size_t a = 0; a < env.n_actions; ++a) {
      const auto obs = featurize(env, s);
      err_r = std::max(err_r, std::abs(q_value(f.critics, obs, a, Channel::reward()) - env.r(s, a)));
      err_c = std::max(err_c, std::abs(q_value(f.critics, obs, a, Channel::cost(0)) - env.c(0, s, a)));
    }
  }
  CHECK(err_r < 0.05);
  CHECK(err_c < 0.05);
}

TEST_CASE("zero signals drive the critics to zero") {
  const CmdpSpec env = testing::one_state_env({0.0, 0.0}, {0.0, 0.0}, 0.9, 5);
  const Dataset ds = generate_dataset(env, BehaviorPolicySpec{0.5, 1.0}, 100, 1);
  const Fit f = fit_critics(ds, 0.9, 1500, 1e-3);
  const auto& last_r = f.losses[f.losses.size() - 2];
  const auto& last_c = f.losses.back();
  CHECK(last_r.q_loss < 1e-4);
  CHECK(last_r.v_loss < 1e-4);
  CHECK(last_c.q_loss < 1e-4);
  CHECK(last_c.v_loss < 1e-4);
  const auto obs = featurize(env, 0);
  CHECK(std::abs(v_value(f.critics, obs, Channel::cost(0))) < 0.01);
}

TEST_CASE("critic training is bit reproducible") {
  const CmdpSpec env = make_grid_twocost(4, 4, 0);
  const Dataset ds = generate_dataset(env, BehaviorPolicySpec{}, 30, 1);
  const Fit a = fit_critics(ds, 0.95, 20, 1e-3), b = fit_critics(ds, 0.95, 20, 1e-3);
  REQUIRE(a.losses.size() == b.losses.size());
  for (std::size_t i = 0; i < a.losses.size(); ++i) {
    CHECK(a.losses[i].q_loss == b.losses[i].q_loss);
    CHECK(a.losses[i].v_loss == b.losses[i].v_loss);
  }
  CHECK(a.critics.cost[1].q_target == b.critics.cost[1].q_target);
}

TEST_CASE("target Q moves only by soft updates") {
  const CmdpSpec env = make_chain_hazard(6, 4.0, 0);
  const Dataset ds = generate_dataset(env, BehaviorPolicySpec{}, 20, 1);
  CriticSet c = make_critic_set(env.obs_dim(), env.n_actions, 1, {8}, Activation::relu, 1e-2, 1e-2, 1);
  RngStream rng(1, "b");
  const Batch batch = make_batch(ds, sample_minibatch(ds, 16, rng));
  const ParamVector before = c.reward.q_target;
  CriticUpdateParams params;
  params.target_tau = 0.25;
  update_reward_critics(c, batch, params);
  ParamVector expected = before;
  soft_update(expected, c.reward.q, 0.25);
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(expected[i] - c.reward.q_target[i]) < 1e-15);
}
