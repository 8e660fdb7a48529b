#include "lexisafe/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lexisafe/binio.hpp"
#include "lexisafe/errors.hpp"
#include "lexisafe/report.hpp"

namespace lexisafe {

namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t x) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << x;
  return os.str();
}

std::string file_checksum(const fs::path& path) { return hex64(binio::checksum(binio::read_file(path))); }

/// Lists every regular file under dir with its size and checksum, plus extra
/// fields, as manifest.json.
void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::ordered_json& extra = {}) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  nlohmann::ordered_json m;
  m["command"] = command;
  nlohmann::ordered_json listing = nlohmann::ordered_json::object();
  for (const auto& f : files) {
    listing[fs::relative(f, dir).generic_string()] = {{"bytes", fs::file_size(f)}, {"fnv1a64", file_checksum(f)}};
  }
  m["files"] = listing;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

/// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (failure) std::rethrow_exception(failure);
}

Dataset load_config_dataset(const RunConfig& config, const CmdpSpec& env) {
  if (config.dataset.path.empty()) throw ConfigError("dataset.path is required for this command");
  Dataset ds = load_dataset(config.dataset.path);
  check_dataset_matches(ds, env);
  return ds;
}

std::string cell(double x) { return csv_number(x); }

std::string schema_text(std::size_t n_costs) {
  std::ostringstream os;
  os << "# Output files\n\n";
  os << "Numbers are written in shortest round-trip form. `nan` marks a quantity that was not computed at that\n"
        "step (for example the loss of an actor phase that did not run); an empty cell in the `oracle_*` columns\n"
        "means no oracle point was taken at that step.\n\n";
  os << "## metrics.csv (one row per training step)\n\n";
  os << "| column | meaning |\n|---|---|\n";
  os << "| step | zero-based gradient step |\n";
  os << "| phase | actor phase scheduled at this step in staged mode, -1 when all phases step together |\n";
  os << "| reward_q_loss, reward_v_loss | pre-step losses of the reward Q and V networks |\n";
  os << "| cost<j>_q_loss, cost<j>_v_loss | pre-step losses of the cost critics of channel j |\n";
  os << "| policy_loss_phase<p> | weighted log-likelihood loss of cost phase p (channel given by the priority order) |\n";
  os << "| policy_loss_reward | loss of the reward phase |\n";
  os << "| lambda<j> | multiplier of channel j after this step's update |\n";
  os << "| smoothed_cost<j> | smoothed cost estimate of channel j used by this step's update |\n";
  os << "| weight_max | largest advantage weight in the batch |\n";
  os << "| critic_in_range | 1 when every critic prediction stayed inside the value bounds |\n";
  os << "| oracle_reward, oracle_cost<j> | exact discounted returns of the current policy |\n";
  os << "| oracle_norm_reward | (oracle_reward - R_min) / (R_max - R_min) |\n";
  os << "| oracle_norm_cost<j> | oracle_cost<j> / kappa_j |\n\n";
  os << "This run has " << n_costs << " cost channel(s), j = 0.." << (n_costs - 1) << ".\n\n";
  os << "## eval.csv\n\n";
  os << "Monte Carlo columns (`mean_*`, `std_*`) are undiscounted per-episode sums over eval.n_episodes episodes; the\n"
        "`discounted_*` variants use the environment discount. `normalized_cost<j>` divides by kappa_eval and\n"
        "`safe<j>` is 1 when it is below 1. `oracle_*` columns are exact discounted returns. `kl` is the mean\n"
        "KL divergence to a behavior-cloned policy (empty when no dataset is configured); `c_hat` is the\n"
        "occupancy-ratio concentrability against the behavior mixture.\n\n";
  os << "## sweep_cells.csv, sweep_summary.csv, sweep_fit.csv\n\n";
  os << "One row per (n, seed) cell with oracle violation sum_j max(0, J_c - kappa) and suboptimality\n"
        "max(0, J* - J_r); per-n means; least-squares slopes of log(mean + 1e-6) against log(n).\n\n";
  os << "## ablation.csv\n\n";
  os << "One row per (method, weights, seed) with oracle returns, normalized reward and costs, and safe flags.\n";
  return os.str();
}

// Writes one metrics.csv row per step and adds oracle points every
// curve_interval steps.
class MetricsLogger {
 public:
  MetricsLogger(const fs::path& path, const CmdpSpec& env, const RunConfig& config)
      : env_(env),
        config_(config),
        kappa_(config.train.cost_thresholds),
        norm_(config.normalization(env)),
        writer_(path, metrics_columns(env.n_costs)) {}

  void log(const TrainState& state, const StepMetrics& m) {
    const std::size_t k = env_.n_costs;
    std::vector<std::string> row;
    row.push_back(std::to_string(m.step));
    row.push_back(std::to_string(m.phase));
    row.push_back(cell(m.reward_critic.q_loss));
    row.push_back(cell(m.reward_critic.v_loss));
    for (std::size_t j = 0; j < k; ++j) {
      row.push_back(cell(m.cost_critic[j].q_loss));
      row.push_back(cell(m.cost_critic[j].v_loss));
    }
    for (std::size_t p = 0; p < k; ++p) row.push_back(cell(m.cost_policy_loss[p]));
    row.push_back(cell(m.reward_policy_loss));
    for (std::size_t j = 0; j < k; ++j) row.push_back(cell(m.lambdas[j]));
    for (std::size_t j = 0; j < k; ++j) row.push_back(cell(m.smoothed_costs[j]));
    row.push_back(cell(m.weight_max));
    row.push_back(m.critic_in_range ? "1" : "0");
    const std::size_t interval = config_.eval.curve_interval;
    const bool last = m.step + 1 == config_.train.total_steps;
    if (interval > 0 && (m.step % interval == 0 || last)) {
      const CurvePoint p =
          oracle_curve_point(env_, tabulate_policy(env_, state.policy, config_.eval.stochastic), kappa_, norm_);
      row.push_back(cell(p.j_r));
      for (std::size_t j = 0; j < k; ++j) row.push_back(cell(p.j_c[j]));
      row.push_back(cell(p.normalized_reward));
      for (std::size_t j = 0; j < k; ++j) row.push_back(cell(p.normalized_costs[j]));
    } else {
      row.resize(writer_.columns());
    }
    writer_.row(row);
  }

 private:
  const CmdpSpec& env_;
  const RunConfig& config_;
  std::vector<double> kappa_;
  NormalizationConstants norm_;
  CsvWriter writer_;
};

std::vector<std::string> eval_columns(std::size_t k) {
  std::vector<std::string> h{"n_episodes", "stochastic", "mean_return", "std_return", "mean_discounted_return",
                             "std_discounted_return", "normalized_reward"};
  for (std::size_t j = 0; j < k; ++j) {
    for (const char* base : {"mean_cost", "std_cost", "mean_discounted_cost", "std_discounted_cost", "normalized_cost",
                             "safe"}) {
      h.push_back(base + std::to_string(j));
    }
  }
  h.push_back("oracle_reward");
  h.push_back("oracle_norm_reward");
  for (std::size_t j = 0; j < k; ++j) {
    h.push_back("oracle_cost" + std::to_string(j));
    h.push_back("oracle_norm_cost" + std::to_string(j));
    h.push_back("oracle_safe" + std::to_string(j));
  }
  for (const char* extra : {"kl", "kl_tolerance", "c_hat", "unvisited_mass"}) h.push_back(extra);
  return h;
}

/// Rollout, oracle, KL and concentrability summary of one policy as eval.csv.
void write_eval_csv(const fs::path& path, const CmdpSpec& env, const RunConfig& config, const PolicyHead& policy,
                    const Dataset* ds) {
  const std::size_t k = env.n_costs;
  const NormalizationConstants norm = config.normalization(env);
  EvalSettings settings;
  settings.n_episodes = config.eval.n_episodes;
  settings.seeds = config.eval.seeds;
  settings.kappa_eval = config.kappa_eval();
  settings.stochastic = config.eval.stochastic;
  const EvalReport r = rollout_eval(env, policy, settings, norm);
  const PolicyTable table = tabulate_policy(env, policy, config.eval.stochastic);
  const CurvePoint oracle = oracle_curve_point(env, table, config.train.cost_thresholds, norm);
  const ConcentrabilityReport conc = concentrability_estimate(env, table, config.behavior);
  double kl = std::numeric_limits<double>::quiet_NaN();
  if (ds != nullptr) {
    BcSettings bc;
    bc.hidden_dims = config.train.hidden_dims;
    bc.steps = config.eval.bc_steps;
    bc.batch_size = std::min(config.train.batch_size, ds->size());
    bc.seed = config.train.seed;
    kl = kl_monitor(policy, train_bc_policy(*ds, bc), *ds);
  }

  std::vector<std::string> row{std::to_string(r.n_episodes),
                               config.eval.stochastic ? "1" : "0",
                               cell(r.mean_return),
                               cell(r.std_return),
                               cell(r.mean_discounted_return),
                               cell(r.std_discounted_return),
                               cell(r.normalized_reward)};
  for (std::size_t j = 0; j < k; ++j) {
    row.push_back(cell(r.mean_costs[j]));
    row.push_back(cell(r.std_costs[j]));
    row.push_back(cell(r.mean_discounted_costs[j]));
    row.push_back(cell(r.std_discounted_costs[j]));
    row.push_back(cell(r.normalized_costs[j]));
    row.push_back(r.safe[j] ? "1" : "0");
  }
  row.push_back(cell(oracle.j_r));
  row.push_back(cell(oracle.normalized_reward));
  for (std::size_t j = 0; j < k; ++j) {
    row.push_back(cell(oracle.j_c[j]));
    row.push_back(cell(oracle.normalized_costs[j]));
    row.push_back(oracle.normalized_costs[j] < 1.0 ? "1" : "0");
  }
  row.push_back(ds != nullptr ? cell(kl) : "");
  row.push_back(cell(config.train.kl_tolerance));
  row.push_back(cell(conc.c_hat));
  row.push_back(cell(conc.unvisited_mass));
  CsvWriter w(path, eval_columns(k));
  w.row(row);
}

std::string weights_label(const std::vector<double>& w) {
  std::string s;
  for (std::size_t j = 0; j < w.size(); ++j) {
    if (j > 0) s += ':';
    s += csv_number(w[j]);
  }
  return s;
}

void ensure_output_dir(const fs::path& out, bool force) {
  if (out.empty()) throw ConfigError("--out is required");
  if (fs::exists(out)) {
    if (!fs::is_directory(out)) throw ConfigError(out.string() + " exists and is not a directory");
    if (!fs::is_empty(out) && !force) {
      throw ConfigError(out.string() + " is not empty; pass --force to write into it");
    }
    if (force) fs::remove_all(out / "checkpoints");
  }
  fs::create_directories(out);
}

// Summary lines for a training run directory.
void summarize_metrics(const fs::path& run_dir, const fs::path& out, std::ostringstream& summary) {
  const CsvTable t = read_csv(run_dir / "metrics.csv");
  std::size_t k = 0;
  while (t.has_column("lambda" + std::to_string(k))) ++k;
  const auto steps = t.numeric("step");
  summary << "training run: " << t.rows.size() << " steps, " << k << " cost channel(s)\n";
  if (t.rows.empty()) return;

  SvgPlot curves{"Normalized oracle costs and reward", "step", "normalized value", {}, 1.0};
  SvgPlot lambdas{"Lagrange multipliers", "step", "lambda", {}, std::nullopt};
  auto points = [&](const std::string& col) {
    SvgSeries s{col, {}, {}};
    const auto ys = t.numeric(col);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (std::isfinite(ys[i])) {
        s.x.push_back(steps[i]);
        s.y.push_back(ys[i]);
      }
    }
    return s;
  };
  for (std::size_t j = 0; j < k; ++j) {
    const std::string col = "oracle_norm_cost" + std::to_string(j);
    curves.series.push_back(points(col));
    lambdas.series.push_back(points("lambda" + std::to_string(j)));
    const auto& s = curves.series.back();
    auto below = std::find_if(s.y.begin(), s.y.end(), [](double y) { return y < 1.0; });
    summary << "  channel " << j << ": first oracle point below kappa at step "
            << (below == s.y.end() ? std::string("never") : csv_number(s.x[static_cast<std::size_t>(below - s.y.begin())]))
            << ", final normalized cost " << (s.y.empty() ? std::string("n/a") : csv_number(s.y.back()))
            << ", final lambda " << csv_number(t.numeric("lambda" + std::to_string(j)).back()) << "\n";
  }
  curves.series.push_back(points("oracle_norm_reward"));
  const auto& r = curves.series.back();
  if (!r.y.empty()) summary << "  final normalized reward " << csv_number(r.y.back()) << "\n";
  write_text_file(out / "training_curves.svg", render_line_plot(curves));
  write_text_file(out / "lambdas.svg", render_line_plot(lambdas));
}

void summarize_ablation(const fs::path& run_dir, const fs::path& out, std::ostringstream& summary) {
  const CsvTable t = read_csv(run_dir / "ablation.csv");
  std::size_t k = 0;
  while (t.has_column("norm_cost" + std::to_string(k))) ++k;
  const std::size_t method_col = t.column("method"), weights_col = t.column("weights");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::string key = t.rows[i][method_col];
    if (!t.rows[i][weights_col].empty()) key += " " + t.rows[i][weights_col];
    if (!rows.contains(key)) order.push_back(key);
    rows[key].push_back(i);
  }
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < k; ++j) labels.push_back("cost " + std::to_string(j));
  labels.push_back("reward");
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < k; ++j) cols.push_back(t.numeric("norm_cost" + std::to_string(j)));
  cols.push_back(t.numeric("norm_reward"));
  std::vector<SvgBarGroup> groups;
  summary << "ablation: mean over seeds (normalized costs..., reward)\n";
  for (const auto& key : order) {
    SvgBarGroup g{key, {}};
    summary << "  " << key << ":";
    for (const auto& col : cols) {
      double sum = 0.0;
      for (std::size_t i : rows[key]) sum += col[i];
      g.values.push_back(sum / static_cast<double>(rows[key].size()));
      summary << " " << csv_number(g.values.back());
    }
    summary << "\n";
    groups.push_back(std::move(g));
  }
  write_text_file(out / "ablation.svg", render_bar_chart("LexiSafe-MC vs weighted IQL", labels, groups, 1.0));
}

void summarize_sweep(const fs::path& run_dir, const fs::path& out, std::ostringstream& summary) {
  const CsvTable s = read_csv(run_dir / "sweep_summary.csv");
  const CsvTable f = read_csv(run_dir / "sweep_fit.csv");
  const auto n = s.numeric("n");
  SvgPlot plot{"Oracle error vs dataset size", "transitions", "mean error", {}, std::nullopt, true, true};
  auto floor = [](std::vector<double> v) {
    for (auto& x : v) x += 1e-6;
    return v;
  };
  plot.series.push_back({"suboptimality", n, floor(s.numeric("mean_suboptimality"))});
  plot.series.push_back({"violation", n, floor(s.numeric("mean_violation"))});
  write_text_file(out / "sweep.svg", render_line_plot(plot));
  summary << "sweep: suboptimality slope " << csv_number(f.numeric("suboptimality_slope").at(0))
          << ", violation slope " << csv_number(f.numeric("violation_slope").at(0)) << "\n";
}

}  // namespace

std::vector<std::string> metrics_columns(std::size_t n_costs) {
  std::vector<std::string> h{"step", "phase", "reward_q_loss", "reward_v_loss"};
  for (std::size_t j = 0; j < n_costs; ++j) {
    h.push_back("cost" + std::to_string(j) + "_q_loss");
    h.push_back("cost" + std::to_string(j) + "_v_loss");
  }
  for (std::size_t p = 0; p < n_costs; ++p) h.push_back("policy_loss_phase" + std::to_string(p));
  h.push_back("policy_loss_reward");
  for (std::size_t j = 0; j < n_costs; ++j) h.push_back("lambda" + std::to_string(j));
  for (std::size_t j = 0; j < n_costs; ++j) h.push_back("smoothed_cost" + std::to_string(j));
  h.push_back("weight_max");
  h.push_back("critic_in_range");
  h.push_back("oracle_reward");
  for (std::size_t j = 0; j < n_costs; ++j) h.push_back("oracle_cost" + std::to_string(j));
  h.push_back("oracle_norm_reward");
  for (std::size_t j = 0; j < n_costs; ++j) h.push_back("oracle_norm_cost" + std::to_string(j));
  return h;
}

double safe_episode_fraction(const Dataset& ds, double gamma, const std::vector<double>& kappa) {
  const std::size_t k = ds.header.n_costs;
  if (kappa.size() != k) throw ConfigError("one threshold per cost channel required");
  std::size_t episodes = 0, safe = 0;
  std::size_t i = 0;
  while (i < ds.size()) {
    const std::uint32_t id = ds.episode_id[i];
    std::vector<double> c(k, 0.0);
    double discount = 1.0;
    for (; i < ds.size() && ds.episode_id[i] == id; ++i) {
      for (std::size_t j = 0; j < k; ++j) c[j] += discount * ds.cost(i, j);
      discount *= gamma;
    }
    ++episodes;
    bool ok = true;
    for (std::size_t j = 0; j < k; ++j) ok = ok && c[j] <= kappa[j];
    if (ok) ++safe;
  }
  return episodes > 0 ? static_cast<double>(safe) / static_cast<double>(episodes) : 0.0;
}

void cmd_gen_data(const RunConfig& config, const fs::path& out) {
  const CmdpSpec env = config.env.build();
  const Dataset ds = generate_dataset(env, config.behavior, config.dataset.n_episodes, config.dataset.seed);
  const fs::path path = out / "dataset.lxsd";
  save_dataset(ds, path);
  nlohmann::ordered_json extra;
  extra["n_transitions"] = ds.size();
  extra["n_episodes"] = config.dataset.n_episodes;
  extra["dataset_fnv1a64"] = file_checksum(path);
  extra["safe_episode_fraction"] = safe_episode_fraction(ds, config.train.gamma, config.train.cost_thresholds);
  write_manifest(out, "gen-data", extra);
}

void cmd_train(const RunConfig& config, const fs::path& out) {
  const CmdpSpec env = config.env.build();
  if (config.train.total_steps == 0) return;
  const Dataset ds = load_config_dataset(config, env);
  write_text_file(out / "SCHEMA.md", schema_text(env.n_costs));
  fs::create_directories(out / "checkpoints");
  std::optional<TrainState> final_state;
  {
    MetricsLogger logger(out / "metrics.csv", env, config);
    try {
      final_state = run_training(env, ds, config.train, [&](const TrainState& state, const StepMetrics& m) {
        logger.log(state, m);
        const std::size_t done = m.step + 1;
        if (config.checkpoint_interval > 0 && done % config.checkpoint_interval == 0) {
          save_checkpoint(state.policy.to_checkpoint(),
                          out / "checkpoints" / ("policy_step" + std::to_string(done) + ".lxck"));
        }
        return true;
      });
    } catch (const NumericalError&) {
      write_manifest(out, "train");
      throw;
    }
  }
  const PolicyHead policy = extract_policy(*final_state);
  save_checkpoint(policy.to_checkpoint(), out / "final_policy.lxck");
  save_checkpoint(train_state_checkpoint(*final_state), out / "train_state.lxck");
  write_eval_csv(out / "eval.csv", env, config, policy, &ds);
  write_manifest(out, "train");
}

void cmd_eval(const RunConfig& config, const fs::path& policy_path, const fs::path& out) {
  if (policy_path.empty()) throw ConfigError("eval needs --policy");
  const CmdpSpec env = config.env.build();
  const PolicyHead policy = PolicyHead::from_checkpoint(load_checkpoint(policy_path));
  if (policy.spec.input_dim != env.obs_dim() || policy.n_actions() != env.n_actions) {
    throw DataError(DataErrorKind::dims_mismatch, "policy shape does not match environment " + env.name);
  }
  std::optional<Dataset> ds;
  if (!config.dataset.path.empty()) ds = load_config_dataset(config, env);
  write_eval_csv(out / "eval.csv", env, config, policy, ds ? &*ds : nullptr);
  write_manifest(out, "eval");
}

void cmd_sweep(const RunConfig& config, const fs::path& out, std::size_t jobs) {
  const CmdpSpec env = config.env.build();
  SweepSettings settings{config.behavior, config.train, config.sweep.n_grid, config.sweep.seeds, jobs,
                         config.eval.stochastic};
  validate_sweep(settings);
  const ScalingReport report = scaling_sweep(env, settings);
  const std::size_t k = env.n_costs;

  std::vector<std::string> h{"n", "seed", "valid", "error", "violation", "suboptimality", "j_r"};
  for (std::size_t j = 0; j < k; ++j) h.push_back("j_c" + std::to_string(j));
  CsvWriter cells(out / "sweep_cells.csv", h);
  for (const auto& c : report.cells) {
    std::string error = c.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::vector<std::string> row{std::to_string(c.n),     std::to_string(c.seed),   c.valid ? "1" : "0", error,
                                 cell(c.violation),       cell(c.suboptimality),    cell(c.j_r)};
    for (std::size_t j = 0; j < k; ++j) row.push_back(c.valid ? cell(c.j_c.at(j)) : "nan");
    cells.row(row);
  }
  CsvWriter summary(out / "sweep_summary.csv", {"n", "mean_violation", "mean_suboptimality"});
  for (std::size_t i = 0; i < report.n_grid.size(); ++i) {
    summary.row({std::to_string(report.n_grid[i]), cell(report.mean_violation[i]), cell(report.mean_suboptimality[i])});
  }
  CsvWriter fit(out / "sweep_fit.csv", {"suboptimality_slope", "suboptimality_intercept", "violation_slope",
                                        "violation_intercept", "j_star", "d_theta", "depth", "seeds_per_cell"});
  fit.row({cell(report.suboptimality_fit.slope), cell(report.suboptimality_fit.intercept),
           cell(report.violation_fit.slope), cell(report.violation_fit.intercept), cell(report.j_star),
           std::to_string(report.d_theta), std::to_string(report.depth), std::to_string(report.seeds_per_cell)});
  write_manifest(out, "sweep");
}

void cmd_ablate(const RunConfig& config, const fs::path& out, std::size_t jobs) {
  const CmdpSpec env = config.env.build();
  if (env.n_costs != 2) throw ConfigError("ablate needs an environment with two cost channels");
  if (config.ablation.seeds.empty()) throw ConfigError("ablation.seeds is empty");
  const NormalizationConstants norm = config.normalization(env);
  const auto& kappa = config.train.cost_thresholds;

  struct Task {
    bool lexisafe;
    std::vector<double> weights;
    std::uint64_t seed;
    CurvePoint result;
  };
  std::vector<Task> tasks;
  for (std::uint64_t seed : config.ablation.seeds) tasks.push_back({true, {}, seed, {}});
  for (const auto& w : config.ablation.weights) {
    for (std::uint64_t seed : config.ablation.seeds) tasks.push_back({false, w, seed, {}});
  }
  std::optional<Dataset> shared;
  if (!config.dataset.path.empty()) shared = load_config_dataset(config, env);

  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    Task& task = tasks[i];
    const Dataset ds = shared ? *shared : generate_dataset(env, config.behavior, config.dataset.n_episodes, task.seed);
    TrainConfig cfg = config.train;
    cfg.seed = task.seed;
    cfg.batch_size = std::min(cfg.batch_size, ds.size());
    if (task.lexisafe) {
      cfg.mode = TrainMode::mc;
    } else {
      cfg.mode = TrainMode::weighted;
      cfg.baseline_weights = task.weights;
    }
    const TrainState state = run_training(env, ds, cfg);
    task.result =
        oracle_curve_point(env, tabulate_policy(env, extract_policy(state), config.eval.stochastic), kappa, norm);
  });

  std::vector<std::string> h{"method", "weights", "seed", "j_r", "norm_reward"};
  for (std::size_t j = 0; j < 2; ++j) {
    h.push_back("j_c" + std::to_string(j));
    h.push_back("norm_cost" + std::to_string(j));
    h.push_back("safe" + std::to_string(j));
  }
  CsvWriter table(out / "ablation.csv", h);
  for (const auto& t : tasks) {
    std::vector<std::string> row{t.lexisafe ? "lexisafe_mc" : "weighted_iql", weights_label(t.weights),
                                 std::to_string(t.seed), cell(t.result.j_r), cell(t.result.normalized_reward)};
    for (std::size_t j = 0; j < 2; ++j) {
      row.push_back(cell(t.result.j_c[j]));
      row.push_back(cell(t.result.normalized_costs[j]));
      row.push_back(t.result.normalized_costs[j] < 1.0 ? "1" : "0");
    }
    table.row(row);
  }
  std::ostringstream summary;
  summarize_ablation(out, out, summary);
  write_text_file(out / "summary.txt", summary.str());
  write_manifest(out, "ablate");
}

void cmd_report(const RunConfig& config, const fs::path& out) {
  const fs::path& dir = config.report.run_dir;
  if (dir.empty()) throw ConfigError("report.run_dir is required");
  if (!fs::is_directory(dir)) throw DataError(DataErrorKind::io, dir.string() + " is not a directory");
  std::ostringstream summary;
  bool any = false;
  if (fs::exists(dir / "metrics.csv")) {
    summarize_metrics(dir, out, summary);
    any = true;
  }
  if (fs::exists(dir / "eval.csv")) {
    const CsvTable e = read_csv(dir / "eval.csv");
    summary << "evaluation: oracle normalized reward " << e.rows.at(0).at(e.column("oracle_norm_reward"));
    for (std::size_t j = 0; e.has_column("oracle_norm_cost" + std::to_string(j)); ++j) {
      summary << ", cost" << j << " " << e.rows.at(0).at(e.column("oracle_norm_cost" + std::to_string(j)));
    }
    summary << "\n";
    any = true;
  }
  if (fs::exists(dir / "ablation.csv")) {
    summarize_ablation(dir, out, summary);
    any = true;
  }
  if (fs::exists(dir / "sweep_summary.csv")) {
    summarize_sweep(dir, out, summary);
    any = true;
  }
  if (!any) throw DataError(DataErrorKind::io, dir.string() + " holds no run outputs");
  write_text_file(out / "summary.txt", summary.str());
  write_manifest(out, "report");
}

int run_command(const CliOptions& options) {
  try {
    static const std::vector<std::string> commands{"gen-data", "train", "eval", "sweep", "ablate", "report"};
    if (std::find(commands.begin(), commands.end(), options.command) == commands.end()) {
      std::string msg = "unknown command '" + options.command + "'";
      if (auto best = closest_match(options.command, commands)) msg += "; did you mean '" + *best + "'?";
      throw ConfigError(msg);
    }
    if (options.config.empty()) throw ConfigError("--config is required");
    if (options.jobs < 1) throw ConfigError("--jobs must be at least 1");
    const RunConfig config = load_run_config(options.config);
    ensure_output_dir(options.out, options.force);
    write_text_file(options.out / kConfigSnapshot, canonical_config_text(config));

    if (options.command == "gen-data") cmd_gen_data(config, options.out);
    if (options.command == "train") cmd_train(config, options.out);
    if (options.command == "eval") cmd_eval(config, options.policy, options.out);
    if (options.command == "sweep") cmd_sweep(config, options.out, options.jobs);
    if (options.command == "ablate") cmd_ablate(config, options.out, options.jobs);
    if (options.command == "report") cmd_report(config, options.out);
    return static_cast<int>(ExitCode::ok);
  } catch (const Error& e) {
    std::cerr << "lexisafe: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "lexisafe: " << e.what() << "\n";
    return static_cast<int>(ExitCode::data_error);
  }
}

}  // namespace lexisafe
