// Acceptance checks. Each criterion prints one PASS/FAIL line; indented lines
// under it carry the per-seed evidence.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lexisafe/cli.hpp"
#include "lexisafe/config.hpp"
#include "lexisafe/errors.hpp"
#include "lexisafe/evaluation.hpp"
#include "lexisafe/report.hpp"

using namespace lexisafe;
namespace fs = std::filesystem;

namespace {

struct Context {
  fs::path source_dir;
  fs::path work_dir;
  std::size_t jobs = 1;
};

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

void note(Outcome& o, const std::string& line) { o.details.push_back(line); }

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

fs::path fresh_dir(const Context& ctx, const std::string& name) {
  const fs::path dir = ctx.work_dir / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig shipped_config(const Context& ctx, const std::string& name) {
  return load_run_config(ctx.source_dir / "configs" / name);
}

RunConfig config_from_text(const std::string& text, const fs::path& base) {
  return resolve_config(parse_config_text(text), base);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::uint64_t file_hash(const fs::path& p) {
  const std::string bytes = slurp(p);
  return fnv1a64(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

fs::path save_generated_dataset(const RunConfig& config, std::uint64_t seed, const fs::path& dir) {
  const CmdpSpec env = config.env.build();
  const fs::path path = dir / ("dataset_seed" + std::to_string(seed) + ".lxsd");
  if (!fs::exists(path)) save_dataset(generate_dataset(env, config.behavior, config.dataset.n_episodes, seed), path);
  return path;
}

// Same layout as the CLI: config snapshot next to the run outputs.
void train_into(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  write_text_file(out / kConfigSnapshot, canonical_config_text(config));
  cmd_train(config, out);
}

// ---------------------------------------------------------------- criterion 1

Outcome formula_exactness(const Context&) {
  Outcome o;
  double worst = 0.0;
  auto check = [&](const std::string& what, double got, double want) {
    const double err = std::abs(got - want);
    worst = std::max(worst, err);
    if (err > 1e-12) note(o, what + ": got " + fmt(got, 17) + ", expected " + fmt(want, 17));
  };

  check("expectile_loss(2, 0.7)", expectile_loss(2.0, 0.7), 0.7 * 4.0);
  check("expectile_loss(-2, 0.7)", expectile_loss(-2.0, 0.7), 0.3 * 4.0);
  check("expectile_loss(0, 0.9)", expectile_loss(0.0, 0.9), 0.0);
  check("expectile_loss(-0.5, 0.9)", expectile_loss(-0.5, 0.9), 0.1 * 0.25);
  check("expectile_loss(1.5, 0.5)", expectile_loss(1.5, 0.5), 0.5 * 2.25);

  check("awr_weight_cost(0.5, 2, 100)", awr_weight_cost(0.5, 2.0, 100.0), std::exp(-1.0));
  check("awr_weight_cost(-0.25, 4, 100)", awr_weight_cost(-0.25, 4.0, 100.0), std::exp(1.0));
  check("awr_weight_cost(-10, 1, 100)", awr_weight_cost(-10.0, 1.0, 100.0), 100.0);
  const std::vector<double> adv_c{0.5, -1.0}, lambdas{2.0, 0.5};
  check("awr_weight_reward(0.3, ...)", awr_weight_reward(0.3, adv_c, 1.5, lambdas, 100.0),
        std::exp(1.5 * 0.3 - 2.0 * 0.5 + 0.5 * 1.0));
  check("awr_weight_reward clip", awr_weight_reward(10.0, adv_c, 1.0, lambdas, 50.0), 50.0);
  const std::vector<double> zeros{0.0, 0.0};
  check("awr_weight_reward with zero multipliers", awr_weight_reward(0.4, adv_c, 2.0, zeros, 100.0), std::exp(0.8));

  const CmdpSpec env = make_chain_hazard(6, 4.0, 0);
  TrainConfig tc;
  tc.gamma = env.gamma;
  tc.hidden_dims = {4};
  tc.lr_lambda = 0.1;
  TrainState state = make_train_state(env, tc);
  state.lambdas[0] = 0.5;
  check("lambda_update above threshold", lambda_update(state, 0, 3.0, tc), 0.5 + 0.1 * 2.0);
  state.lambdas[0] = 0.05;
  check("lambda_update projection", lambda_update(state, 0, 0.0, tc), 0.0);
  state.lambdas[0] = 0.3;
  check("lambda_update at threshold", lambda_update(state, 0, 1.0, tc), 0.3);

  // Constant cost critic V = 2 makes the batch estimate exactly 2.
  auto& v = state.critics.cost[0].v;
  std::fill(v.values.begin(), v.values.end(), 0.0);
  v[v.size() - 1] = 2.0;
  const Dataset ds = generate_dataset(env, BehaviorPolicySpec{}, 5, 1);
  RngStream rng(1, "acceptance");
  const Batch batch = make_batch(ds, sample_minibatch(ds, 8, rng));
  tc.smoothing_alpha = 0.05;
  state.smoothed_ready[0] = 1;
  state.smoothed_costs[0] = 1.0;
  check("smooth_cost_estimate", smooth_cost_estimate(state, 0, batch, tc), 0.95 * 1.0 + 0.05 * 2.0);
  state.smoothed_ready[0] = 0;
  check("smooth_cost_estimate first call", smooth_cost_estimate(state, 0, batch, tc), 2.0);

  ParamVector target(3), online(3);
  target.values = {1.0, -2.0, 0.5};
  online.values = {3.0, 4.0, -0.5};
  soft_update(target, online, 0.005);
  check("soft_update[0]", target[0], 0.995 * 1.0 + 0.005 * 3.0);
  check("soft_update[1]", target[1], 0.995 * -2.0 + 0.005 * 4.0);
  check("soft_update[2]", target[2], 0.995 * 0.5 + 0.005 * -0.5);

  o.pass = worst <= 1e-12;
  o.summary = "formula exactness, max abs error " + fmt(worst, 3);
  return o;
}

// ---------------------------------------------------------------- criterion 2

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

Outcome gradient_suite(const Context&) {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t net = 0; net < 20; ++net) {
    RngStream rng(net, "acceptance.gradcheck");
    MlpSpec spec;
    spec.input_dim = 1 + rng.below(6);
    for (std::size_t l = 0, depth = 1 + rng.below(3); l < depth; ++l) spec.hidden_dims.push_back(2 + rng.below(8));
    spec.output_dim = 1 + rng.below(3);
    spec.activation = net % 2 == 0 ? Activation::relu : Activation::tanh;
    ParamVector p = init_params(spec, rng);
    for (auto& x : p.values) x += 0.1 * (rng.uniform() - 0.5);

    // Batched objective sum_k g_k . f(x_k) over a small batch.
    const Eigen::Index b = 4;
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(spec.input_dim), b), gs(static_cast<Eigen::Index>(spec.output_dim), b);
    for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = 2.0 * rng.uniform() - 1.0;
    for (Eigen::Index i = 0; i < gs.size(); ++i) gs.data()[i] = 2.0 * rng.uniform() - 1.0;
    ForwardCache cache;
    forward_batch(spec, p, xs, &cache);
    std::vector<double> grad(p.size());
    backward_batch(spec, p, cache, gs, grad);
    auto objective = [&](const ParamVector& q) { return (forward_batch(spec, q, xs).array() * gs.array()).sum(); };

    double net_worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.size(); ++i) {
      ParamVector plus = p, minus = p;
      plus[i] += h;
      minus[i] -= h;
      net_worst = std::max(net_worst, rel_err(grad[i], (objective(plus) - objective(minus)) / (2.0 * h)));
    }
    worst = std::max(worst, net_worst);
    std::string shape = std::to_string(spec.input_dim);
    for (auto d : spec.hidden_dims) shape += "-" + std::to_string(d);
    shape += "-" + std::to_string(spec.output_dim);
    note(o, "net " + std::to_string(net) + " (" + shape + ", " + to_string(spec.activation) +
                ") max relative error " + fmt(net_worst, 3));
  }
  o.pass = worst < 1e-6;
  o.summary = "gradient suite over 20 random nets, max relative error " + fmt(worst, 3) + " (< 1e-6)";
  return o;
}

// ---------------------------------------------------------------- criterion 3

Outcome oracle_equivalence(const Context&) {
  Outcome o;
  ChainHazardParams p;
  p.max_steps = 200;  // truncation far beyond the discount horizon
  const CmdpSpec env = make_chain_hazard(p);
  CmdpSpec stationary = env;
  stationary.max_steps = 0;
  BehaviorPolicySpec behavior;
  behavior.epsilon_explore = 1.0;
  const Dataset ds = generate_dataset(env, behavior, 2000, 3);

  TrainConfig tc;
  tc.gamma = env.gamma;
  tc.lr_q = tc.lr_v = 1e-3;
  tc.target_tau = 0.005;
  tc.hidden_dims = {64, 64};
  tc.batch_size = 256;
  tc.seed = 3;
  CriticSet critics = make_critic_set(env.obs_dim(), env.n_actions, env.n_costs, tc.hidden_dims, tc.activation, tc.lr_q,
                                      tc.lr_v, tc.seed);
  RngStream rng(tc.seed, "acceptance.critics");
  CriticUpdateParams params{tc.gamma, tc.expectiles, tc.target_tau, 0};
  const std::size_t steps = 20000;
  for (std::size_t k = 0; k < steps; ++k) {
    const Batch batch = make_batch(ds, sample_minibatch(ds, tc.batch_size, rng));
    params.step = k;
    update_reward_critics(critics, batch, params);
    update_cost_critics(critics, batch, params, 0);
  }

  const PolicyTable uniform = uniform_policy_table(stationary);
  const double q_max_r = env.r_max_bound / (1.0 - env.gamma);
  const double q_max_c = env.c_max_bound / (1.0 - env.gamma);
  const double err_r =
      critic_sup_error(critics, stationary, policy_evaluation_oracle(stationary, uniform, Channel::reward()),
                       Channel::reward());
  const double err_c =
      critic_sup_error(critics, stationary, policy_evaluation_oracle(stationary, uniform, Channel::cost(0)),
                       Channel::cost(0));
  note(o, "dataset " + std::to_string(ds.size()) + " transitions from 2000 uniform-behavior episodes, " +
              std::to_string(steps) + " critic steps");
  note(o, "reward: sup error " + fmt(err_r) + " vs 10% of Q_max " + fmt(0.1 * q_max_r));
  note(o, "cost:   sup error " + fmt(err_c) + " vs 10% of Q_max " + fmt(0.1 * q_max_c));
  o.pass = err_r < 0.1 * q_max_r && err_c < 0.1 * q_max_c;
  o.summary = "critics vs exact Q of the behavior policy, relative sup errors " + fmt(err_r / q_max_r, 3) + " (reward), " +
              fmt(err_c / q_max_c, 3) + " (cost)";
  return o;
}

// ---------------------------------------------------------------- criterion 4

const std::vector<std::uint64_t> kSeeds{7, 17, 27, 77, 777};

Outcome safety_performance(const Context& ctx) {
  Outcome o;
  const fs::path dir = fresh_dir(ctx, "c4");
  std::size_t passed = 0;
  for (std::uint64_t seed : kSeeds) {
    RunConfig config = shipped_config(ctx, "chain_sc.ini");
    config.dataset.seed = seed;
    config.train.seed = seed;
    config.dataset.path = save_generated_dataset(config, seed, dir);
    const fs::path out = dir / ("seed" + std::to_string(seed));
    train_into(config, out);

    const CmdpSpec env = config.env.build();
    const PolicyHead policy = PolicyHead::from_checkpoint(load_checkpoint(out / "final_policy.lxck"));
    const ExactReturns lexi = exact_returns(env, tabulate_policy(env, policy, config.eval.stochastic));

    TrainConfig safety = config.train;
    safety.schedule_mode = ScheduleMode::staged;
    safety.staged_phase_steps = {safety.total_steps, 0};
    const TrainState s = run_training(env, load_dataset(config.dataset.path), safety);
    const ExactReturns base = exact_returns(env, tabulate_policy(env, extract_policy(s), config.eval.stochastic));

    const double kappa = config.train.cost_thresholds[0];
    const bool ok = lexi.j_c[0] <= 1.05 * kappa && lexi.j_r > base.j_r;
    passed += ok ? 1 : 0;
    note(o, "seed " + std::to_string(seed) + ": J_c " + fmt(lexi.j_c[0]) + " (limit " + fmt(1.05 * kappa) + "), J_r " +
                fmt(lexi.j_r) + " vs safety-phase-only J_r " + fmt(base.j_r) + (ok ? "  ok" : "  FAIL"));
  }
  o.pass = passed >= 4;
  o.summary = "single-cost safety and performance on chain_hazard, " + std::to_string(passed) + "/5 seeds";
  return o;
}

// ---------------------------------------------------------------- criterion 5

struct Curve {
  std::vector<double> step, reward, cost0, cost1;
  std::vector<int> phase;
};

Curve read_oracle_curve(const fs::path& metrics) {
  const CsvTable t = read_csv(metrics);
  const auto step = t.numeric("step"), phase = t.numeric("phase"), r = t.numeric("oracle_norm_reward"),
             c0 = t.numeric("oracle_norm_cost0"), c1 = t.numeric("oracle_norm_cost1");
  Curve c;
  for (std::size_t i = 0; i < step.size(); ++i) {
    if (std::isnan(r[i])) continue;
    c.step.push_back(step[i]);
    c.phase.push_back(static_cast<int>(phase[i]));
    c.reward.push_back(r[i]);
    c.cost0.push_back(c0[i]);
    c.cost1.push_back(c1[i]);
  }
  return c;
}

// First logged step at which the curve is below 1, or +inf.
double first_below_one(const Curve& c, const std::vector<double>& y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 1.0) return c.step[i];
  }
  return INFINITY;
}

// Mean of the points whose step lies in [from, from + window).
double window_mean(const Curve& c, double from, double window) {
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < c.step.size(); ++i) {
    if (c.step[i] >= from && c.step[i] < from + window) {
      s += c.reward[i];
      ++n;
    }
  }
  return n > 0 ? s / n : NAN;
}

Outcome phase_ordering(const Context& ctx) {
  Outcome o;
  const fs::path dir = fresh_dir(ctx, "c5");
  const double window = 500.0;
  std::vector<std::size_t> passed;
  for (bool swapped : {false, true}) {
    std::size_t ok_count = 0;
    for (std::uint64_t seed : kSeeds) {
      RunConfig config = shipped_config(ctx, "grid_mc.ini");
      config.dataset.seed = seed;
      config.train.seed = seed;
      config.train.priority = swapped ? std::vector<std::size_t>{1, 0} : std::vector<std::size_t>{0, 1};
      config.dataset.path = save_generated_dataset(config, seed, dir);
      const fs::path out = dir / ((swapped ? "speed_first_seed" : "crash_first_seed") + std::to_string(seed));
      train_into(config, out);

      const Curve c = read_oracle_curve(out / "metrics.csv");
      const double t_crash = first_below_one(c, c.cost0), t_speed = first_below_one(c, c.cost1);
      const bool order_ok = swapped ? t_speed < t_crash : t_crash < t_speed;
      const double total = static_cast<double>(config.train.total_steps);
      double tail_max = 0.0;
      for (std::size_t i = 0; i < c.step.size(); ++i) {
        if (c.step[i] >= 0.8 * total) tail_max = std::max({tail_max, c.cost0[i], c.cost1[i]});
      }
      const auto budgets = config.train.phase_budgets(2);
      const double final_start = total - static_cast<double>(budgets.back());
      const double r_start = window_mean(c, final_start, window);
      const double r_end = window_mean(c, total - window, window);
      const bool ok = order_ok && tail_max < 1.1 && r_end >= r_start;
      ok_count += ok ? 1 : 0;
      note(o, std::string(swapped ? "speed-first" : "crash-first") + " seed " + std::to_string(seed) +
                  ": first below 1 at crash " + fmt(t_crash) + " / speed " + fmt(t_speed) + ", max cost over last 20% " +
                  fmt(tail_max) + ", reward MA500 " + fmt(r_start) + " -> " + fmt(r_end) + (ok ? "  ok" : "  FAIL"));
    }
    passed.push_back(ok_count);
  }
  o.pass = passed[0] >= 4 && passed[1] >= 4;
  o.summary = "staged phase ordering on grid_twocost, crash-first " + std::to_string(passed[0]) + "/5, speed-first " +
              std::to_string(passed[1]) + "/5";
  return o;
}

// ---------------------------------------------------------------- criterion 6

Outcome ablation_dominance(const Context& ctx) {
  Outcome o;
  const fs::path dir = fresh_dir(ctx, "c6");
  const RunConfig config = shipped_config(ctx, "grid_ablation.ini");
  cmd_ablate(config, dir, ctx.jobs);

  const CsvTable t = read_csv(dir / "ablation.csv");
  struct Row {
    double j_r, c0, c1;
  };
  std::map<std::string, Row> mc;
  std::map<std::string, std::vector<std::pair<std::string, Row>>> weighted;
  for (const auto& r : t.rows) {
    const Row row{std::stod(r[t.column("j_r")]), std::stod(r[t.column("norm_cost0")]),
                  std::stod(r[t.column("norm_cost1")])};
    if (r[t.column("method")] == "lexisafe_mc") {
      mc[r[t.column("seed")]] = row;
    } else {
      weighted[r[t.column("seed")]].push_back({r[t.column("weights")], row});
    }
  }
  std::size_t mc_safe = 0, dominated = 0;
  for (const auto& [seed, m] : mc) {
    const bool safe = m.c0 < 1.0 && m.c1 < 1.0;
    mc_safe += safe ? 1 : 0;
    std::string worst;
    bool any = false;
    for (const auto& [w, r] : weighted[seed]) {
      const bool violates = r.c0 >= 1.0 || r.c1 >= 1.0;
      const bool worse = r.j_r <= m.j_r - 0.1 * std::abs(m.j_r);
      if (violates || worse) {
        any = true;
        worst += " " + w + (violates ? "(unsafe)" : "(low return)");
      }
    }
    dominated += any ? 1 : 0;
    note(o, "seed " + seed + ": LexiSafe-MC J_r " + fmt(m.j_r) + ", costs " + fmt(m.c0) + " / " + fmt(m.c1) +
                (safe ? " safe" : " UNSAFE") + "; weighted settings failing:" + (any ? worst : " none"));
  }
  o.pass = mc_safe >= 4 && dominated * 2 > mc.size();
  o.summary = "ablation against weighted IQL, LexiSafe-MC safe on " + std::to_string(mc_safe) + "/5 seeds, dominates on " +
              std::to_string(dominated) + "/" + std::to_string(mc.size());
  return o;
}

// ---------------------------------------------------------------- criterion 7

Outcome scaling_trend(const Context& ctx) {
  Outcome o;
  const std::vector<double> n{500, 1500, 5000, 15000, 50000};
  std::vector<double> flat(n.size(), 0.25), root(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) root[i] = 3.0 / std::sqrt(n[i]);
  const double slope0 = fit_loglog(n, flat).slope, slope_half = fit_loglog(n, root, 0.0).slope;
  const bool synthetic_ok = std::abs(slope0) < 1e-6 && std::abs(slope_half + 0.5) < 1e-6;
  note(o, "synthetic fits: constant column slope " + fmt(slope0, 3) + ", n^-1/2 column slope " + fmt(slope_half, 10));

  const fs::path dir = fresh_dir(ctx, "c7");
  const RunConfig config = shipped_config(ctx, "chain_sweep.ini");
  cmd_sweep(config, dir, ctx.jobs);
  const CsvTable summary = read_csv(dir / "sweep_summary.csv");
  const auto ns = summary.numeric("n"), sub = summary.numeric("mean_suboptimality"),
             viol = summary.numeric("mean_violation");
  for (std::size_t i = 0; i < ns.size(); ++i) {
    note(o, "N " + fmt(ns[i], 6) + ": mean suboptimality " + fmt(sub[i]) + ", mean violation " + fmt(viol[i]));
  }
  const double slope = read_csv(dir / "sweep_fit.csv").numeric("suboptimality_slope").at(0);
  o.pass = synthetic_ok && slope < 0.0 && slope >= -1.2 && slope <= -0.1;
  o.summary = "scaling trend on chain_hazard, suboptimality slope " + fmt(slope) + " (want [-1.2, -0.1]), synthetic fits " +
              (synthetic_ok ? "exact" : "WRONG");
  return o;
}

// ---------------------------------------------------------------- criterion 8

constexpr const char* kSmallChain = R"(
[env]
name = chain_hazard
length = 12

[dataset]
n_episodes = 300
seed = 5

[train]
mode = sc
batch_size = 128
total_steps = 3000
hidden_dims = 32, 32
lr_lambda = 1e-3
seed = 5

[eval]
n_episodes = 10
curve_interval = 250
bc_steps = 200
)";

Outcome sc_mc_collapse(const Context& ctx) {
  Outcome o;
  const fs::path dir = fresh_dir(ctx, "c8");
  RunConfig sc = config_from_text(kSmallChain, dir);
  fs::create_directories(dir / "data");
  cmd_gen_data(sc, dir / "data");
  sc.dataset.path = dir / "data" / "dataset.lxsd";
  std::size_t identical = 0;
  for (ScheduleMode sched : {ScheduleMode::interleaved, ScheduleMode::staged}) {
    sc.train.schedule_mode = sched;
    RunConfig mc = sc;
    mc.train.mode = TrainMode::mc;
    const fs::path a = dir / (std::string("sc_") + to_string(sched)), b = dir / (std::string("mc_") + to_string(sched));
    train_into(sc, a);
    train_into(mc, b);
    const bool same = slurp(a / "metrics.csv") == slurp(b / "metrics.csv");
    identical += same ? 1 : 0;
    note(o, std::string(to_string(sched)) + ": metrics.csv " + (same ? "bit-identical" : "DIFFERS") + " (" +
                std::to_string(fs::file_size(a / "metrics.csv")) + " bytes)");
  }
  o.pass = identical == 2;
  o.summary = "single-cost MC run reproduces the SC run bit for bit (" + std::to_string(identical) + "/2 schedules)";
  return o;
}

// ---------------------------------------------------------------- criterion 9

std::map<std::string, std::uint64_t> csv_hashes(const fs::path& dir) {
  std::map<std::string, std::uint64_t> h;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") h[fs::relative(e.path(), dir).string()] = file_hash(e.path());
  }
  return h;
}

template <class Fn>
bool throws_kind(Fn&& fn, DataErrorKind kind) {
  try {
    fn();
  } catch (const DataError& e) {
    return e.kind() == kind;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome determinism_and_format(const Context& ctx) {
  Outcome o;
  const fs::path dir = fresh_dir(ctx, "c9");
  bool ok = true;

  const std::string grid_text = R"(
[env]
name = grid_twocost
width = 6
height = 4
wall_rows = 1

[dataset]
n_episodes = 60
seed = 2

[train]
mode = mc
cost_thresholds = 0.5, 2.0
batch_size = 64
total_steps = 300
hidden_dims = 16
seed = 2

[eval]
n_episodes = 10
curve_interval = 50
bc_steps = 50

[sweep]
n_grid = 200, 600, 2000, 7000
seeds = 1, 2, 3

[ablation]
weights = 1:1, 100:1
seeds = 1, 2
)";
  // Each command twice into separate directories.
  for (const char* command : {"gen-data", "train", "eval", "sweep", "ablate", "report"}) {
    std::vector<std::map<std::string, std::uint64_t>> runs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = dir / (std::string(command) + "_" + std::to_string(rep));
      fs::create_directories(out);
      RunConfig config = config_from_text(grid_text, dir);
      config.train.total_steps = std::string(command) == "sweep" ? 100 : config.train.total_steps;
      config.dataset.path = dir / "gen-data_0" / "dataset.lxsd";
      config.report.run_dir = dir / "train_0";
      const std::string c = command;
      if (c == "gen-data") {
        config.dataset.path.clear();
        cmd_gen_data(config, out);
      }
      if (c == "train") train_into(config, out);
      if (c == "eval") cmd_eval(config, dir / "train_0" / "final_policy.lxck", out);
      if (c == "sweep") cmd_sweep(config, out, ctx.jobs);
      if (c == "ablate") {
        config.dataset.path.clear();
        cmd_ablate(config, out, ctx.jobs);
      }
      if (c == "report") cmd_report(config, out);
      runs.push_back(csv_hashes(out));
    }
    if (std::string(command) == "gen-data") {
      const bool same = file_hash(dir / "gen-data_0/dataset.lxsd") == file_hash(dir / "gen-data_1/dataset.lxsd");
      ok = ok && same;
      note(o, std::string("gen-data: dataset.lxsd ") + (same ? "identical" : "DIFFERS"));
    }
    const bool same = runs[0] == runs[1];
    ok = ok && same;
    note(o, std::string(command) + ": " + std::to_string(runs[0].size()) + " csv file(s) " +
                (same ? "identical" : "DIFFER"));
  }

  // Dataset round trip and corruption.
  const Dataset ds = load_dataset(dir / "gen-data_0/dataset.lxsd");
  const auto bytes = encode_dataset(ds);
  const bool ds_round = encode_dataset(decode_dataset(bytes)) == bytes && decode_dataset(bytes) == ds &&
                        slurp(dir / "gen-data_0/dataset.lxsd") == std::string(bytes.begin(), bytes.end());
  // Files end in an 8-byte checksum; one record is obs, next_obs, reward
  // and costs as floats plus action, done and episode id.
  const auto record = static_cast<std::ptrdiff_t>(sizeof(float) * (2 * ds.header.obs_dim + 1 + ds.header.n_costs) + 9);
  auto corrupt = [&](auto mutate) {
    auto b = bytes;
    mutate(b);
    return b;
  };
  const bool ds_errors =
      throws_kind([&] { decode_dataset(corrupt([](auto& b) { b[0] = 'X'; })); }, DataErrorKind::bad_magic) &&
      throws_kind([&] { decode_dataset(corrupt([](auto& b) { b[4] = 9; })); }, DataErrorKind::version_mismatch) &&
      throws_kind([&] { decode_dataset(corrupt([](auto& b) { b[b.size() / 2] ^= 0x40; })); },
                  DataErrorKind::checksum_mismatch) &&
      throws_kind([&] { decode_dataset(corrupt([&](auto& b) { b.erase(b.end() - 8 - record, b.end() - 8); })); },
                  DataErrorKind::truncated_columns) &&
      throws_kind([&] { decode_dataset(corrupt([](auto& b) { b.insert(b.end() - 8, 4, 0); })); },
                  DataErrorKind::length_disagreement);
  note(o, std::string("LXSD: round trip ") + (ds_round ? "bit-exact" : "DIFFERS") + ", corruption errors " +
              (ds_errors ? "as specified" : "WRONG"));

  const Checkpoint ckpt = load_checkpoint(dir / "train_0/train_state.lxck");
  const auto cbytes = encode_checkpoint(ckpt);
  const bool ck_round = decode_checkpoint(cbytes) == ckpt && encode_checkpoint(decode_checkpoint(cbytes)) == cbytes &&
                        slurp(dir / "train_0/train_state.lxck") == std::string(cbytes.begin(), cbytes.end());
  auto ccorrupt = [&](auto mutate) {
    auto b = cbytes;
    mutate(b);
    return b;
  };
  const bool ck_errors =
      throws_kind([&] { decode_checkpoint(ccorrupt([](auto& b) { b[1] = 'Y'; })); }, DataErrorKind::bad_magic) &&
      throws_kind([&] { decode_checkpoint(ccorrupt([](auto& b) { b[4] = 7; })); }, DataErrorKind::version_mismatch) &&
      throws_kind([&] { decode_checkpoint(ccorrupt([](auto& b) { b[b.size() / 2] ^= 0x10; })); },
                  DataErrorKind::checksum_mismatch) &&
      throws_kind([&] { decode_checkpoint(ccorrupt([](auto& b) { b.erase(b.end() - 16, b.end() - 8); })); },
                  DataErrorKind::truncated_columns) &&
      throws_kind([&] { decode_checkpoint(ccorrupt([](auto& b) { b.insert(b.end() - 8, 4, 0); })); },
                  DataErrorKind::length_disagreement);
  note(o, std::string("LXCK: round trip ") + (ck_round ? "bit-exact" : "DIFFERS") + ", corruption errors " +
              (ck_errors ? "as specified" : "WRONG"));

  o.pass = ok && ds_round && ds_errors && ck_round && ck_errors;
  o.summary = "determinism of every command and binary format round trips";
  return o;
}

// ---------------------------------------------------------------- criterion 10

struct LambdaScan {
  std::size_t rows = 0;
  std::size_t violations = 0;
  std::size_t up_steps = 0;
  std::size_t down_steps = 0;
  std::string first_violation;
};

LambdaScan scan_lambdas(const fs::path& metrics, std::span<const double> kappa) {
  const CsvTable t = read_csv(metrics);
  LambdaScan s;
  for (std::size_t j = 0; j < kappa.size(); ++j) {
    const auto lam = t.numeric("lambda" + std::to_string(j));
    const auto ct = t.numeric("smoothed_cost" + std::to_string(j));
    s.rows = lam.size();
    double prev = 0.0;  // multipliers start at lambda_init = 0
    for (std::size_t i = 0; i < lam.size(); ++i) {
      bool bad = lam[i] < 0.0;
      if (ct[i] > kappa[j]) {
        bad = bad || lam[i] < prev;
        s.up_steps += lam[i] > prev ? 1 : 0;
      } else if (ct[i] < kappa[j]) {
        bad = bad || lam[i] > prev;
        s.down_steps += lam[i] < prev ? 1 : 0;
      }
      if (bad && s.violations++ == 0) {
        s.first_violation = "row " + std::to_string(i) + " channel " + std::to_string(j);
      }
      prev = lam[i];
    }
  }
  return s;
}

Outcome lambda_dynamics(const Context& ctx) {
  Outcome o;
  const fs::path dir = fresh_dir(ctx, "c10");
  RunConfig config = config_from_text(R"(
[env]
name = grid_twocost
width = 6
height = 4
wall_rows = 1

[dataset]
n_episodes = 200
seed = 4

[train]
mode = mc
cost_thresholds = 0.08, 0.8
batch_size = 128
total_steps = 3000
hidden_dims = 32, 32
lr_lambda = 0.01
seed = 4

[eval]
curve_interval = 0
bc_steps = 100
)",
                                      dir);
  fs::create_directories(dir / "data");
  cmd_gen_data(config, dir / "data");
  config.dataset.path = dir / "data" / "dataset.lxsd";
  train_into(config, dir / "run");

  // Also scan every other run left in the work directory.
  std::vector<std::pair<fs::path, std::vector<double>>> logs{{dir / "run" / "metrics.csv", config.train.cost_thresholds}};
  for (const auto& e : fs::recursive_directory_iterator(ctx.work_dir)) {
    if (e.path().filename() != "metrics.csv" || e.path().parent_path() == dir / "run") continue;
    const fs::path snapshot = e.path().parent_path() / kConfigSnapshot;
    const RunConfig run = fs::exists(snapshot) ? load_run_config(snapshot) : config;
    logs.push_back({e.path(), run.train.cost_thresholds});
  }
  bool ok = true;
  for (const auto& [path, kappa] : logs) {
    const LambdaScan s = scan_lambdas(path, kappa);
    ok = ok && s.violations == 0;
    note(o, fs::relative(path, ctx.work_dir).string() + ": " + std::to_string(s.rows) + " rows, " +
                std::to_string(s.up_steps) + " increases, " + std::to_string(s.down_steps) + " decreases, " +
                std::to_string(s.violations) + " violations" + (s.violations ? " (first at " + s.first_violation + ")" : ""));
  }
  o.pass = ok;
  o.summary = "multiplier dynamics over " + std::to_string(logs.size()) + " logged run(s)";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LexiSafe acceptance checks"};
  std::vector<int> criteria;
  Context ctx;
  ctx.source_dir = LEXISAFE_SOURCE_DIR;
  ctx.work_dir = fs::current_path() / "acceptance_runs";
  ctx.jobs = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("-c,--criterion", criteria, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--work", ctx.work_dir, "scratch directory for run outputs");
  app.add_option("--jobs", ctx.jobs, "worker threads for the sweep and ablation");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  fs::create_directories(ctx.work_dir);

  const std::map<int, std::function<Outcome(const Context&)>> checks{
      {1, formula_exactness},   {2, gradient_suite},      {3, oracle_equivalence},  {4, safety_performance},
      {5, phase_ordering},      {6, ablation_dominance},  {7, scaling_trend},       {8, sc_mc_collapse},
      {9, determinism_and_format}, {10, lambda_dynamics},
  };
  int failures = 0;
  for (int c : criteria) {
    Outcome o;
    try {
      o = checks.at(c)(ctx);
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("aborted: ") + e.what();
    }
    std::printf("criterion %d [PRIMARY] %s: %s\n", c, o.pass ? "PASS" : "FAIL", o.summary.c_str());
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
