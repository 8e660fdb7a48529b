#include "lexisafe/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "lexisafe/errors.hpp"

namespace lexisafe {

PolicyTable tabulate_policy(const CmdpSpec& env, const PolicyHead& policy, bool stochastic) {
  if (policy.spec.input_dim != env.obs_dim() || policy.n_actions() != env.n_actions) {
    throw DataError(DataErrorKind::dims_mismatch, "policy shape does not match environment " + env.name);
  }
  PolicyTable t{env.n_states, env.n_actions, std::vector<double>(env.n_states * env.n_actions, 0.0)};
  for (std::size_t s = 0; s < env.n_states; ++s) {
    const auto obs = featurize(env, s);
    if (stochastic) {
      const auto p = policy.probabilities(obs);
      std::copy(p.begin(), p.end(), t.probs.begin() + static_cast<std::ptrdiff_t>(s * env.n_actions));
    } else {
      t.probs[s * env.n_actions + policy.greedy_action(obs)] = 1.0;
    }
  }
  return t;
}

PolicyTable scripted_policy_table(const CmdpSpec& env, std::size_t mask, double epsilon) {
  PolicyTable t{env.n_states, env.n_actions, {}};
  for (std::size_t s = 0; s < env.n_states; ++s) {
    const auto p = scripted_action_probs(env, mask, epsilon, s);
    t.probs.insert(t.probs.end(), p.begin(), p.end());
  }
  return t;
}

PolicyTable uniform_policy_table(const CmdpSpec& env) {
  return {env.n_states, env.n_actions,
          std::vector<double>(env.n_states * env.n_actions, 1.0 / static_cast<double>(env.n_actions))};
}

PolicyTable deterministic_policy_table(const CmdpSpec& env, std::span<const std::size_t> actions) {
  if (actions.size() != env.n_states) throw UsageError("deterministic policy needs one action per state");
  PolicyTable t{env.n_states, env.n_actions, std::vector<double>(env.n_states * env.n_actions, 0.0)};
  for (std::size_t s = 0; s < env.n_states; ++s) t.probs[s * env.n_actions + actions[s]] = 1.0;
  return t;
}

std::vector<double> channel_table(const CmdpSpec& env, Channel ch) {
  if (ch.is_reward) return env.reward;
  if (ch.index >= env.n_costs) throw UsageError("cost channel out of range");
  return env.costs[ch.index];
}

namespace {

void check_table(const CmdpSpec& env, const PolicyTable& policy) {
  if (policy.n_states != env.n_states || policy.n_actions != env.n_actions ||
      policy.probs.size() != env.n_states * env.n_actions) {
    throw DataError(DataErrorKind::dims_mismatch, "policy table does not match environment " + env.name);
  }
}

// q(s, a) = signal(s, a) + g * sum_s' P(s'|s, a) v(s'), zero on terminal rows.
void backup(const CmdpSpec& env, std::span<const double> signal, double g, const std::vector<double>& v,
            std::vector<double>& q) {
  const std::size_t S = env.n_states, A = env.n_actions;
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double x = 0.0;
      if (!env.is_terminal(s)) {
        const auto p = env.next_state_probs(s, a);
        double ev = 0.0;
        for (std::size_t s2 = 0; s2 < S; ++s2) ev += p[s2] * v[s2];
        x = signal[s * A + a] + g * ev;
      }
      q[s * A + a] = x;
    }
  }
}

void expect_values(const CmdpSpec& env, const PolicyTable& policy, const std::vector<double>& q,
                   std::vector<double>& v) {
  const std::size_t A = env.n_actions;
  for (std::size_t s = 0; s < env.n_states; ++s) {
    double x = 0.0;
    for (std::size_t a = 0; a < A; ++a) x += policy(s, a) * q[s * A + a];
    v[s] = x;
  }
}

void extreme_values(const CmdpSpec& env, bool maximize, const std::vector<double>& q, std::vector<double>& v,
                    std::vector<std::size_t>* actions) {
  const std::size_t A = env.n_actions;
  for (std::size_t s = 0; s < env.n_states; ++s) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < A; ++a) {
      const double x = q[s * A + a], b = q[s * A + best];
      if (maximize ? x > b : x < b) best = a;
    }
    v[s] = q[s * A + best];
    if (actions) (*actions)[s] = best;
  }
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double initial_value(const CmdpSpec& env, const std::vector<double>& v) {
  double j = 0.0;
  for (std::size_t s = 0; s < env.n_states; ++s) j += env.init_dist[s] * v[s];
  return j;
}

double resolve_gamma(const CmdpSpec& env, std::optional<double> gamma) {
  const double g = gamma.value_or(env.gamma);
  if (!(g > 0.0 && g <= 1.0)) throw ConfigError("oracle discount must lie in (0, 1]");
  if (g == 1.0 && env.max_steps <= 0) throw ConfigError("undiscounted evaluation needs a finite horizon");
  return g;
}

}  // namespace

OracleReport policy_evaluation_oracle(const CmdpSpec& env, const PolicyTable& policy, Channel ch,
                                      std::optional<double> gamma, double tol, std::size_t max_iterations) {
  check_table(env, policy);
  const double g = resolve_gamma(env, gamma);
  const auto signal = channel_table(env, ch);
  OracleReport r;
  r.q.assign(env.n_states * env.n_actions, 0.0);
  r.v.assign(env.n_states, 0.0);
  std::vector<double> q_next(r.q.size());
  if (env.max_steps > 0) {
    // Backward recursion: after h sweeps, q holds values with h steps to go.
    r.finite_horizon = true;
    for (int h = 0; h < env.max_steps; ++h) {
      backup(env, signal, g, r.v, r.q);
      expect_values(env, policy, r.q, r.v);
    }
    r.iterations = static_cast<std::size_t>(env.max_steps);
    r.residual = 0.0;
  } else {
    for (;;) {
      backup(env, signal, g, r.v, q_next);
      r.residual = sup_diff(q_next, r.q);
      r.q.swap(q_next);
      expect_values(env, policy, r.q, r.v);
      ++r.iterations;
      if (r.residual < tol) break;
      if (r.iterations >= max_iterations) {
        throw NumericalError("policy evaluation did not converge: residual " + std::to_string(r.residual) +
                             " after " + std::to_string(r.iterations) + " iterations");
      }
    }
  }
  r.j = initial_value(env, r.v);
  return r;
}

double critic_sup_error(const CriticSet& critics, const CmdpSpec& env, const OracleReport& exact, Channel ch) {
  double err = 0.0;
  for (std::size_t s = 0; s < env.n_states; ++s) {
    if (env.is_terminal(s)) continue;
    const auto obs = featurize(env, s);
    for (std::size_t a = 0; a < env.n_actions; ++a) {
      err = std::max(err, std::abs(q_value(critics, obs, a, ch) - exact.q[s * env.n_actions + a]));
    }
  }
  return err;
}

OptimalReport optimal_value(const CmdpSpec& env, std::span<const double> signal, bool maximize,
                            std::optional<double> gamma, double tol) {
  const double g = resolve_gamma(env, gamma);
  OptimalReport r;
  r.v.assign(env.n_states, 0.0);
  r.actions.assign(env.n_states, 0);
  std::vector<double> q(env.n_states * env.n_actions, 0.0);
  if (env.max_steps > 0) {
    for (int h = 0; h < env.max_steps; ++h) {
      backup(env, signal, g, r.v, q);
      extreme_values(env, maximize, q, r.v, &r.actions);
    }
  } else {
    std::vector<double> v_prev;
    for (std::size_t it = 0;; ++it) {
      v_prev = r.v;
      backup(env, signal, g, r.v, q);
      extreme_values(env, maximize, q, r.v, &r.actions);
      if (sup_diff(r.v, v_prev) < tol) break;
      if (it > 10'000'000) throw NumericalError("value iteration did not converge");
    }
  }
  r.j = initial_value(env, r.v);
  return r;
}

NormalizationConstants normalization_constants(const CmdpSpec& env) {
  NormalizationConstants n;
  n.r_max = optimal_value(env, env.reward, true).j;
  n.r_min = optimal_value(env, env.reward, false).j;
  if (env.max_steps > 0) {
    n.r_max_undiscounted = optimal_value(env, env.reward, true, 1.0).j;
    n.r_min_undiscounted = optimal_value(env, env.reward, false, 1.0).j;
  } else {
    n.r_max_undiscounted = n.r_max;
    n.r_min_undiscounted = n.r_min;
  }
  return n;
}

ExactReturns exact_returns(const CmdpSpec& env, const PolicyTable& policy) {
  ExactReturns r;
  r.j_r = policy_evaluation_oracle(env, policy, Channel::reward()).j;
  for (std::size_t j = 0; j < env.n_costs; ++j) r.j_c.push_back(policy_evaluation_oracle(env, policy, Channel::cost(j)).j);
  return r;
}

SafeOptimum safe_optimal_policy(const CmdpSpec& env, std::span<const double> kappa) {
  if (kappa.size() != env.n_costs) throw ConfigError("safe_optimal_policy: one threshold per cost channel required");
  CmdpSpec stationary = env;
  stationary.max_steps = 0;
  SafeOptimum best;
  auto consider = [&](const std::vector<std::size_t>& actions) {
    const ExactReturns r = exact_returns(env, deterministic_policy_table(env, actions));
    for (std::size_t j = 0; j < env.n_costs; ++j) {
      if (r.j_c[j] > kappa[j]) return;
    }
    if (!best.found || r.j_r > best.j_r) best = SafeOptimum{actions, r.j_r, r.j_c, true};
  };
  std::vector<double> grid{0.0};
  for (double mu = 1e-3; mu <= 1e4; mu *= 1.25) grid.push_back(mu);
  // One multiplier per channel for up to two channels; beyond that the
  // product grid gets too large and a shared multiplier is used.
  const std::size_t free_dims = env.n_costs <= 2 ? env.n_costs : 1;
  std::vector<std::size_t> idx(free_dims, 0);
  std::vector<double> penalized(env.reward.size());
  while (true) {
    for (std::size_t i = 0; i < penalized.size(); ++i) {
      double pen = 0.0;
      for (std::size_t j = 0; j < env.n_costs; ++j) {
        pen += grid[idx[std::min(j, free_dims - 1)]] * env.costs[j][i] / kappa[j];
      }
      penalized[i] = env.reward[i] - pen;
    }
    consider(optimal_value(stationary, penalized, true).actions);
    consider(optimal_value(env, penalized, true).actions);
    std::size_t d = 0;
    while (d < free_dims && ++idx[d] == grid.size()) idx[d++] = 0;
    if (d == free_dims) break;
  }
  for (const auto& profile : env.scripted_actions) consider(profile);
  return best;
}

EvalReport rollout_eval(const CmdpSpec& env, const ActionSelector& select, const EvalSettings& settings,
                        const NormalizationConstants& norm) {
  if (settings.n_episodes < 1 || settings.seeds.empty()) throw ConfigError("evaluation needs episodes and seeds");
  if (settings.kappa_eval.size() != env.n_costs) throw ConfigError("kappa_eval needs one entry per cost channel");
  const std::size_t n = settings.n_episodes, k = env.n_costs;
  std::vector<double> ret(n), dret(n);
  std::vector<std::vector<double>> cost(k, std::vector<double>(n)), dcost(k, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(settings.seeds[i % settings.seeds.size()], "eval.episode", i / settings.seeds.size());
    const Trajectory t = rollout(env, select, rng);
    ret[i] = t.undiscounted_return;
    dret[i] = t.episode_return;
    for (std::size_t j = 0; j < k; ++j) {
      cost[j][i] = t.undiscounted_costs[j];
      dcost[j][i] = t.episode_costs[j];
    }
  }
  auto mean_std = [](const std::vector<double>& xs) {
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return std::pair{m, sd};
  };
  EvalReport r;
  r.n_episodes = n;
  r.eval_seeds = settings.seeds;
  std::tie(r.mean_return, r.std_return) = mean_std(ret);
  std::tie(r.mean_discounted_return, r.std_discounted_return) = mean_std(dret);
  const double span = norm.r_max_undiscounted - norm.r_min_undiscounted;
  r.normalized_reward = span > 0.0 ? (r.mean_return - norm.r_min_undiscounted) / span : 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto [m, sd] = mean_std(cost[j]);
    const auto [dm, dsd] = mean_std(dcost[j]);
    r.mean_costs.push_back(m);
    r.std_costs.push_back(sd);
    r.mean_discounted_costs.push_back(dm);
    r.std_discounted_costs.push_back(dsd);
    r.normalized_costs.push_back(m / settings.kappa_eval[j]);
    r.safe.push_back(r.normalized_costs.back() < 1.0);
  }
  return r;
}

EvalReport rollout_eval(const CmdpSpec& env, const PolicyHead& policy, const EvalSettings& settings,
                        const NormalizationConstants& norm) {
  const PolicyTable table = tabulate_policy(env, policy, settings.stochastic);
  const ActionSelector select = [&](std::size_t s, RngStream& rng) {
    if (!settings.stochastic) {
      const auto row = table.row(s);
      return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return rng.categorical(table.row(s));
  };
  return rollout_eval(env, select, settings, norm);
}

CurvePoint oracle_curve_point(const CmdpSpec& env, const PolicyTable& policy, std::span<const double> kappa,
                              const NormalizationConstants& norm) {
  const ExactReturns r = exact_returns(env, policy);
  CurvePoint p;
  p.j_r = r.j_r;
  p.j_c = r.j_c;
  const double span = norm.r_max - norm.r_min;
  p.normalized_reward = span > 0.0 ? (r.j_r - norm.r_min) / span : 0.0;
  for (std::size_t j = 0; j < r.j_c.size(); ++j) p.normalized_costs.push_back(r.j_c[j] / kappa[j]);
  return p;
}

namespace {

// Unnormalized sum_h gamma^h P(s_h = s, a_h = a), over the episode horizon.
std::vector<double> raw_occupancy(const CmdpSpec& env, const PolicyTable& policy) {
  check_table(env, policy);
  const std::size_t S = env.n_states, A = env.n_actions;
  std::vector<double> d(S * A, 0.0), p = env.init_dist, p_next(S);
  const std::size_t horizon = env.max_steps > 0 ? static_cast<std::size_t>(env.max_steps) : 100'000;
  double discount = 1.0;
  for (std::size_t h = 0; h < horizon; ++h) {
    std::fill(p_next.begin(), p_next.end(), 0.0);
    double live = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      if (env.is_terminal(s) || p[s] == 0.0) continue;
      live += p[s];
      for (std::size_t a = 0; a < A; ++a) {
        const double m = p[s] * policy(s, a);
        if (m == 0.0) continue;
        d[s * A + a] += discount * m;
        const auto next = env.next_state_probs(s, a);
        for (std::size_t s2 = 0; s2 < S; ++s2) p_next[s2] += m * next[s2];
      }
    }
    p.swap(p_next);
    discount *= env.gamma;
    if (env.max_steps <= 0 && discount * live < 1e-17) break;
  }
  return d;
}

void normalize(std::vector<double>& d) {
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  if (!(total > 0.0)) throw NumericalError("occupancy has no mass");
  for (double& x : d) x /= total;
}

}  // namespace

std::vector<double> occupancy(const CmdpSpec& env, const PolicyTable& policy) {
  auto d = raw_occupancy(env, policy);
  normalize(d);
  return d;
}

std::vector<double> behavior_occupancy(const CmdpSpec& env, const BehaviorPolicySpec& behavior) {
  std::vector<double> d(env.n_states * env.n_actions, 0.0);
  for (std::size_t mask = 0; mask <= env.fully_safe_mask(); ++mask) {
    const double w = profile_probability(behavior, env.n_costs, mask);
    if (w == 0.0) continue;
    const auto dm = raw_occupancy(env, scripted_policy_table(env, mask, behavior.epsilon_explore));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += w * dm[i];
  }
  normalize(d);
  return d;
}

ConcentrabilityReport concentrability_from_occupancies(std::vector<double> d_pi, std::vector<double> d_beta) {
  if (d_pi.size() != d_beta.size()) throw UsageError("occupancy tables differ in size");
  ConcentrabilityReport r;
  for (std::size_t i = 0; i < d_pi.size(); ++i) {
    if (d_beta[i] > 1e-12) {
      r.c_hat = std::max(r.c_hat, d_pi[i] / d_beta[i]);
    } else {
      r.unvisited_mass += d_pi[i];
    }
  }
  r.d_pi = std::move(d_pi);
  r.d_beta = std::move(d_beta);
  return r;
}

ConcentrabilityReport concentrability_estimate(const CmdpSpec& env, const PolicyTable& policy,
                                               const BehaviorPolicySpec& behavior) {
  return concentrability_from_occupancies(occupancy(env, policy), behavior_occupancy(env, behavior));
}

ConcentrabilityReport concentrability_estimate(const CmdpSpec& env, const PolicyTable& policy,
                                               const PolicyTable& behavior) {
  return concentrability_from_occupancies(occupancy(env, policy), occupancy(env, behavior));
}

PolicyHead train_bc_policy(const Dataset& ds, const BcSettings& settings) {
  const MlpSpec spec{ds.header.obs_dim, settings.hidden_dims, ds.header.n_actions, Activation::relu};
  RngStream init_rng(settings.seed, "bc.init");
  RngStream batch_rng(settings.seed, "bc.minibatch");
  PolicyHead bc{spec, init_params(spec, init_rng)};
  AdamState opt = AdamState::for_params(bc.params.size(), settings.lr);
  const std::size_t b = std::min(settings.batch_size, ds.size());
  const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(b));
  for (std::size_t step = 0; step < settings.steps; ++step) {
    const auto idx = sample_minibatch(ds, b, batch_rng);
    policy_nll_step(bc, opt, make_batch(ds, idx), ones, step);
  }
  return bc;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw UsageError("kl_divergence: distributions differ in length");
  std::vector<double> qf(q.begin(), q.end());
  for (double& x : qf) x = std::max(x, 1e-8);
  const double z = std::accumulate(qf.begin(), qf.end(), 0.0);
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(qf[i] / z));
  }
  return std::max(kl, 0.0);
}

double kl_monitor(const PolicyHead& policy, const PolicyHead& bc, const Dataset& ds) {
  if (ds.size() == 0) throw DataError(DataErrorKind::length_disagreement, "kl_monitor on an empty dataset");
  std::map<std::vector<float>, double> cache;
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = ds.obs_row(i);
    std::vector<float> key(row.begin(), row.end());
    auto it = cache.find(key);
    if (it == cache.end()) {
      const std::vector<double> obs(row.begin(), row.end());
      it = cache.emplace(std::move(key), kl_divergence(policy.probabilities(obs), bc.probabilities(obs))).first;
    }
    total += it->second;
  }
  return total / static_cast<double>(ds.size());
}

LinearFit fit_loglog(std::span<const double> n, std::span<const double> err, double floor) {
  if (n.size() != err.size() || n.size() < 2) throw ConfigError("log-log fit needs at least two paired points");
  const std::size_t m = n.size();
  std::vector<double> x(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(n[i] > 0.0)) throw ConfigError("log-log fit needs positive sizes");
    x[i] = std::log(n[i]);
    y[i] = std::log(err[i] + floor);
  }
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(m);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("log-log fit needs at least two distinct sizes");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

void validate_sweep(const SweepSettings& settings) {
  const auto& g = settings.n_grid;
  if (g.size() < 4) throw ConfigError("need >= 4 grid points, got " + std::to_string(g.size()));
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (g[i] <= g[i - 1]) throw ConfigError("n_grid must be strictly increasing");
  }
  if (g.front() < 1 || std::log10(static_cast<double>(g.back()) / static_cast<double>(g.front())) < 1.5) {
    throw ConfigError("n_grid must span at least 1.5 decades");
  }
  if (settings.seeds.size() < 3) throw ConfigError("each sweep cell needs at least 3 seeds");
  if (settings.jobs < 1) throw ConfigError("jobs must be at least 1");
}

ScalingReport scaling_sweep(const CmdpSpec& env, const SweepSettings& settings) {
  validate_sweep(settings);
  settings.train.validate(env.n_costs);
  const SafeOptimum opt = safe_optimal_policy(env, settings.train.cost_thresholds);
  if (!opt.found) throw ConfigError("no deterministic policy satisfies the cost thresholds; sweep has no reference");

  ScalingReport report;
  report.n_grid = settings.n_grid;
  report.seeds_per_cell = settings.seeds.size();
  report.j_star = opt.j_r;
  report.depth = settings.train.hidden_dims.size() + 1;
  report.d_theta = MlpSpec{env.obs_dim(), settings.train.hidden_dims, env.n_actions, settings.train.activation}
                       .param_count();
  for (std::size_t n : settings.n_grid) {
    for (std::uint64_t seed : settings.seeds) {
      ScalingCell cell;
      cell.n = n;
      cell.seed = seed;
      report.cells.push_back(std::move(cell));
    }
  }

  auto run_cell = [&](ScalingCell& cell) {
    try {
      const Dataset ds = generate_dataset_transitions(env, settings.behavior, cell.n, cell.seed);
      TrainConfig cfg = settings.train;
      cfg.seed = cell.seed;
      cfg.batch_size = std::min(cfg.batch_size, ds.size());
      const TrainState state = run_training(env, ds, cfg);
      const ExactReturns r = exact_returns(env, tabulate_policy(env, extract_policy(state), settings.stochastic));
      cell.j_r = r.j_r;
      cell.j_c = r.j_c;
      for (std::size_t j = 0; j < env.n_costs; ++j) cell.violation += std::max(0.0, r.j_c[j] - cfg.cost_thresholds[j]);
      cell.suboptimality = std::max(0.0, opt.j_r - r.j_r);
    } catch (const std::exception& e) {
      cell.valid = false;
      cell.error = e.what();
    }
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < report.cells.size();) run_cell(report.cells[i]);
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(settings.jobs, report.cells.size()); ++t) pool.emplace_back(worker);
    worker();
  }
  std::sort(report.cells.begin(), report.cells.end(),
            [](const ScalingCell& a, const ScalingCell& b) { return std::pair{a.n, a.seed} < std::pair{b.n, b.seed}; });

  std::vector<double> fit_n;
  for (std::size_t n : settings.n_grid) {
    double sub = 0.0, vio = 0.0;
    std::size_t count = 0;
    for (const auto& c : report.cells) {
      if (c.n != n || !c.valid) continue;
      sub += c.suboptimality;
      vio += c.violation;
      ++count;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.mean_suboptimality.push_back(count ? sub / static_cast<double>(count) : nan);
    report.mean_violation.push_back(count ? vio / static_cast<double>(count) : nan);
  }
  std::vector<double> xs, sub, vio;
  for (std::size_t i = 0; i < settings.n_grid.size(); ++i) {
    if (std::isnan(report.mean_suboptimality[i])) continue;
    xs.push_back(static_cast<double>(settings.n_grid[i]));
    sub.push_back(report.mean_suboptimality[i]);
    vio.push_back(report.mean_violation[i]);
  }
  if (xs.size() >= 2) {
    report.suboptimality_fit = fit_loglog(xs, sub);
    report.violation_fit = fit_loglog(xs, vio);
  } else {
    report.suboptimality_fit = report.violation_fit = {std::numeric_limits<double>::quiet_NaN(),
                                                       std::numeric_limits<double>::quiet_NaN()};
  }
  return report;
}

}  // namespace lexisafe
