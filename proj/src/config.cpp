#include "lexisafe/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "lexisafe/binio.hpp"
#include "lexisafe/errors.hpp"

namespace lexisafe {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
  text = trim(text);
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(where + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  text = trim(text);
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
std::vector<T> parse_list(std::string_view text, const std::string& where) {
  std::vector<T> out;
  for (auto item : split_list(text)) out.push_back(parse_number<T>(item, where));
  return out;
}

template <typename T>
std::string format_list(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

bool parse_bool(std::string_view text, const std::string& where) {
  text = trim(text);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(where + ": expected true or false, got '" + std::string(text) + "'");
}

// A schema entry: how to read one key into the config and write it back.
struct Field {
  std::string name;
  std::function<void(std::string_view, const std::string&)> parse;
  std::function<std::string()> format;
};

template <typename T>
Field number_field(std::string name, T& target) {
  return {name, [&target](std::string_view v, const std::string& where) { target = parse_number<T>(v, where); },
          [&target] {
            if constexpr (std::is_floating_point_v<T>) {
              return format_double(target);
            } else {
              return std::to_string(target);
            }
          }};
}

template <typename T>
Field list_field(std::string name, std::vector<T>& target) {
  return {name, [&target](std::string_view v, const std::string& where) { target = parse_list<T>(v, where); },
          [&target] { return format_list(target); }};
}

Field bool_field(std::string name, bool& target) {
  return {name, [&target](std::string_view v, const std::string& where) { target = parse_bool(v, where); },
          [&target] { return std::string(target ? "true" : "false"); }};
}

Field optional_field(std::string name, std::optional<double>& target) {
  return {name,
          [&target](std::string_view v, const std::string& where) {
            v = trim(v);
            if (v == "auto" || v.empty()) {
              target.reset();
            } else {
              target = parse_number<double>(v, where);
            }
          },
          [&target] { return target ? format_double(*target) : std::string("auto"); }};
}

Field path_field(std::string name, std::filesystem::path& target, const std::filesystem::path& base) {
  return {name,
          [&target, base](std::string_view v, const std::string&) {
            v = trim(v);
            target = v.empty() ? std::filesystem::path{} : std::filesystem::path(std::string(v));
            if (!target.empty() && target.is_relative() && !base.empty()) target = base / target;
          },
          [&target] { return target.string(); }};
}

std::vector<Field> env_fields(EnvConfig& e) {
  std::vector<Field> f;
  f.push_back({"name", [](std::string_view, const std::string&) {}, [&e] { return e.name; }});
  if (e.name == "chain_hazard") {
    auto& p = e.chain;
    f.push_back(number_field("length", p.length));
    f.push_back(number_field("hazard_cost", p.hazard_cost));
    f.push_back(number_field("seed", p.seed));
    f.push_back(number_field("slip", p.slip));
    f.push_back(number_field("gamma", p.gamma));
    f.push_back(number_field("max_steps", p.max_steps));
    f.push_back(number_field("step_reward", p.step_reward));
    f.push_back(number_field("sprint_reward", p.sprint_reward));
    f.push_back(number_field("goal_bonus", p.goal_bonus));
    f.push_back(number_field("reward_jitter", p.reward_jitter));
  } else {
    auto& p = e.grid;
    f.push_back(number_field("width", p.width));
    f.push_back(number_field("height", p.height));
    f.push_back(number_field("seed", p.seed));
    f.push_back(number_field("slip", p.slip));
    f.push_back(number_field("gamma", p.gamma));
    f.push_back(number_field("max_steps", p.max_steps));
    f.push_back(number_field("goal_bonus", p.goal_bonus));
    f.push_back(number_field("crash_cost", p.crash_cost));
    f.push_back(number_field("speed_cost", p.speed_cost));
    f.push_back(number_field("wall_rows", p.wall_rows));
  }
  return f;
}

std::vector<Field> train_fields(RunConfig& c) {
  auto& t = c.train;
  std::vector<Field> f;
  f.push_back({"mode", [&t](std::string_view v, const std::string&) { t.mode = train_mode_from_string(std::string(trim(v))); },
               [&t] { return std::string(to_string(t.mode)); }});
  f.push_back({"schedule_mode",
               [&t](std::string_view v, const std::string&) {
                 t.schedule_mode = schedule_mode_from_string(std::string(trim(v)));
               },
               [&t] { return std::string(to_string(t.schedule_mode)); }});
  f.push_back({"activation",
               [&t](std::string_view v, const std::string&) { t.activation = activation_from_string(std::string(trim(v))); },
               [&t] { return std::string(to_string(t.activation)); }});
  f.push_back(number_field("gamma", t.gamma));
  f.push_back(list_field("cost_thresholds", t.cost_thresholds));
  f.push_back(list_field("beta_c", t.beta_c));
  f.push_back(number_field("beta_r", t.beta_r));
  f.push_back(number_field("xi_reward", t.expectiles.xi_reward));
  f.push_back(number_field("xi_cost", t.expectiles.xi_cost));
  f.push_back(number_field("lr_actor", t.lr_actor));
  f.push_back(number_field("lr_q", t.lr_q));
  f.push_back(number_field("lr_v", t.lr_v));
  f.push_back(number_field("lr_lambda", t.lr_lambda));
  f.push_back(number_field("batch_size", t.batch_size));
  f.push_back(number_field("total_steps", t.total_steps));
  f.push_back(number_field("smoothing_alpha", t.smoothing_alpha));
  f.push_back(number_field("target_tau", t.target_tau));
  f.push_back(number_field("kl_tolerance", t.kl_tolerance));
  f.push_back(number_field("weight_clip_max", t.weight_clip_max));
  f.push_back(number_field("lambda_init", t.lambda_init));
  f.push_back(list_field("staged_phase_steps", t.staged_phase_steps));
  f.push_back(list_field("priority", t.priority));
  f.push_back(list_field("baseline_weights", t.baseline_weights));
  f.push_back(list_field("hidden_dims", t.hidden_dims));
  f.push_back(number_field("seed", t.seed));
  f.push_back(number_field("checkpoint_interval", c.checkpoint_interval));
  return f;
}

std::vector<Field> section_fields(const std::string& section, RunConfig& c, const std::filesystem::path& base) {
  if (section == "env") return env_fields(c.env);
  if (section == "behavior") {
    auto& b = c.behavior;
    return {number_field("safe_fraction", b.safe_fraction), number_field("epsilon_explore", b.epsilon_explore),
            list_field("channel_safe_fractions", b.channel_safe_fractions), number_field("coupling", b.coupling)};
  }
  if (section == "dataset") {
    auto& d = c.dataset;
    return {path_field("path", d.path, base), number_field("n_episodes", d.n_episodes), number_field("seed", d.seed)};
  }
  if (section == "train") return train_fields(c);
  if (section == "eval") {
    auto& e = c.eval;
    return {number_field("n_episodes", e.n_episodes), list_field("seeds", e.seeds), optional_field("r_min", e.r_min),
            optional_field("r_max", e.r_max),         list_field("kappa_eval", e.kappa_eval),
            bool_field("stochastic", e.stochastic),  number_field("curve_interval", e.curve_interval),
            number_field("bc_steps", e.bc_steps)};
  }
  if (section == "sweep") return {list_field("n_grid", c.sweep.n_grid), list_field("seeds", c.sweep.seeds)};
  if (section == "ablation") {
    auto& a = c.ablation;
    Field weights{"weights",
                  [&a](std::string_view v, const std::string& where) {
                    a.weights.clear();
                    for (auto item : split_list(v)) {
                      std::vector<double> w;
                      std::size_t start = 0;
                      while (true) {
                        const auto colon = item.find(':', start);
                        w.push_back(parse_number<double>(
                            item.substr(start, colon == std::string_view::npos ? std::string_view::npos : colon - start),
                            where));
                        if (colon == std::string_view::npos) break;
                        start = colon + 1;
                      }
                      a.weights.push_back(std::move(w));
                    }
                  },
                  [&a] {
                    std::string out;
                    for (std::size_t i = 0; i < a.weights.size(); ++i) {
                      if (i > 0) out += ", ";
                      for (std::size_t j = 0; j < a.weights[i].size(); ++j) {
                        if (j > 0) out += ':';
                        out += format_double(a.weights[i][j]);
                      }
                    }
                    return out;
                  }};
    return {weights, list_field("seeds", a.seeds)};
  }
  if (section == "report") return {path_field("run_dir", c.report.run_dir, base)};
  return {};
}

const std::vector<std::string> kSections{"ablation", "behavior", "dataset", "env", "eval", "report", "sweep", "train"};

std::vector<std::string> field_names(const std::vector<Field>& fields) {
  std::vector<std::string> names;
  for (const auto& f : fields) names.push_back(f.name);
  return names;
}

[[noreturn]] void unknown(const std::string& what, const std::string& word, const std::vector<std::string>& candidates,
                          int line, const std::string& context = {}) {
  std::string msg = "unknown " + what + " '" + word + "'" + context;
  if (line > 0) msg += " (line " + std::to_string(line) + ")";
  if (auto best = closest_match(word, candidates)) msg += "; did you mean '" + *best + "'?";
  throw ConfigError(msg);
}

}  // namespace

ConfigDocument parse_config_text(std::string_view text) {
  ConfigDocument doc;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at + ": unterminated section header");
      std::string name(trim(line.substr(1, line.size() - 2)));
      if (name.empty()) throw ConfigError(at + ": empty section name");
      for (const auto& s : doc.sections) {
        if (s.name == name) throw ConfigError(at + ": section [" + name + "] appears twice");
      }
      doc.sections.push_back({name, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(at + ": expected 'key = value'");
    if (doc.sections.empty()) throw ConfigError(at + ": key outside of any section");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(at + ": empty key");
    auto& section = doc.sections.back();
    for (const auto& e : section.entries) {
      if (e.key == key) throw ConfigError(at + ": key '" + key + "' repeated in [" + section.name + "]");
    }
    section.entries.push_back({key, std::string(trim(line.substr(eq + 1))), line_no});
  }
  return doc;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::optional<std::string> closest_match(std::string_view word, const std::vector<std::string>& candidates) {
  std::optional<std::string> best;
  std::size_t best_d = std::max<std::size_t>(2, word.size() / 3) + 1;
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

CmdpSpec EnvConfig::build() const {
  if (name == "chain_hazard") return make_chain_hazard(chain);
  if (name == "grid_twocost") return make_grid_twocost(grid);
  unknown("environment", name, {"chain_hazard", "grid_twocost"}, 0);
}

double EnvConfig::gamma() const { return name == "chain_hazard" ? chain.gamma : grid.gamma; }

std::vector<double> RunConfig::kappa_eval() const {
  return eval.kappa_eval.empty() ? train.cost_thresholds : eval.kappa_eval;
}

NormalizationConstants RunConfig::normalization(const CmdpSpec& env) const {
  NormalizationConstants n = normalization_constants(env);
  if (eval.r_min) n.r_min = n.r_min_undiscounted = *eval.r_min;
  if (eval.r_max) n.r_max = n.r_max_undiscounted = *eval.r_max;
  return n;
}

RunConfig resolve_config(const ConfigDocument& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  for (const auto& s : doc.sections) {
    if (std::find(kSections.begin(), kSections.end(), s.name) == kSections.end()) {
      unknown("section", s.name, kSections, 0);
    }
  }
  // The env name selects which env keys exist, so it is read first.
  for (const auto& s : doc.sections) {
    if (s.name != "env") continue;
    for (const auto& e : s.entries) {
      if (e.key == "name") {
        c.env.name = e.value;
        if (c.env.name != "chain_hazard" && c.env.name != "grid_twocost") {
          unknown("environment", c.env.name, {"chain_hazard", "grid_twocost"}, e.line);
        }
      }
    }
  }
  bool gamma_given = false;
  bool weights_given = false;
  for (const auto& s : doc.sections) {
    const auto fields = section_fields(s.name, c, base_dir);
    for (const auto& e : s.entries) {
      auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.name == e.key; });
      if (it == fields.end()) unknown("key", e.key, field_names(fields), e.line, " in [" + s.name + "]");
      it->parse(e.value, s.name + "." + e.key + " (line " + std::to_string(e.line) + ")");
      if (s.name == "train" && e.key == "gamma") gamma_given = true;
      if (s.name == "ablation" && e.key == "weights") weights_given = true;
    }
  }
  if (!gamma_given) c.train.gamma = c.env.gamma();

  const CmdpSpec env = c.env.build();
  if (!weights_given) {
    // The first channel's weight is swept; the others stay at 1.
    c.ablation.weights.clear();
    for (double w : {1.0, 10.0, 100.0, 1000.0, 5000.0}) {
      std::vector<double> ws(env.n_costs, 1.0);
      ws[0] = w;
      c.ablation.weights.push_back(ws);
    }
  }
  c.behavior.validate();
  c.train.validate(env.n_costs);
  if (c.dataset.n_episodes < 1) throw ConfigError("dataset.n_episodes must be positive");
  if (c.eval.n_episodes < 1 || c.eval.seeds.empty()) throw ConfigError("eval needs n_episodes >= 1 and seeds");
  if (!c.eval.kappa_eval.empty() && c.eval.kappa_eval.size() != env.n_costs) {
    throw ConfigError("eval.kappa_eval needs one entry per cost channel");
  }
  for (const auto& w : c.ablation.weights) {
    if (w.size() != env.n_costs) throw ConfigError("ablation.weights entries need one weight per cost channel");
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  try {
    bytes = binio::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  const std::string text(bytes.begin(), bytes.end());
  return resolve_config(parse_config_text(text), path.parent_path());
}

std::string canonical_config_text(const RunConfig& config) {
  RunConfig copy = config;
  std::string out;
  for (const auto& section : kSections) {
    auto fields = section_fields(section, copy, {});
    std::sort(fields.begin(), fields.end(), [](const Field& a, const Field& b) { return a.name < b.name; });
    if (!out.empty()) out += '\n';
    out += "[" + section + "]\n";
    for (const auto& f : fields) out += f.name + " = " + f.format() + "\n";
  }
  return out;
}

}  // namespace lexisafe
