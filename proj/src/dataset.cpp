#include "lexisafe/dataset.hpp"

#include <algorithm>
#include <json.hpp>
#include <limits>
#include <string>

#include "lexisafe/binio.hpp"
#include "lexisafe/errors.hpp"

namespace lexisafe {

using nlohmann::json;

void BehaviorPolicySpec::validate() const {
  if (!(safe_fraction >= 0.0 && safe_fraction <= 1.0)) throw ConfigError("behavior.safe_fraction must lie in [0, 1]");
  if (!(epsilon_explore >= 0.0 && epsilon_explore <= 1.0)) {
    throw ConfigError("behavior.epsilon_explore must lie in [0, 1]");
  }
  for (double f : channel_safe_fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("behavior.channel_safe_fractions entries must lie in [0, 1]");
  }
  if (!(coupling >= 0.0 && coupling <= 1.0)) throw ConfigError("behavior.coupling must lie in [0, 1]");
}

std::vector<double> scripted_action_probs(const CmdpSpec& env, std::size_t mask, double epsilon, std::size_t state) {
  std::vector<double> probs(env.n_actions, epsilon / static_cast<double>(env.n_actions));
  probs[env.scripted_actions.at(mask).at(state)] += 1.0 - epsilon;
  return probs;
}

namespace {

std::size_t mask_from_shared_draw(const BehaviorPolicySpec& behavior, std::size_t n_costs, double u) {
  std::size_t mask = 0;
  for (std::size_t j = 0; j < n_costs; ++j) {
    if (u < behavior.safe_fraction_for(j)) mask |= std::size_t{1} << j;
  }
  return mask;
}

}  // namespace

double profile_probability(const BehaviorPolicySpec& behavior, std::size_t n_costs, std::size_t mask) {
  double independent = 1.0;
  for (std::size_t j = 0; j < n_costs; ++j) {
    const double f = behavior.safe_fraction_for(j);
    independent *= (mask >> j) & 1U ? f : 1.0 - f;
  }
  if (behavior.coupling == 0.0) return independent;

  // Under a shared draw u the mask is piecewise constant in u, changing only
  // at the per-channel fractions.
  std::vector<double> cuts{0.0, 1.0};
  for (std::size_t j = 0; j < n_costs; ++j) cuts.push_back(behavior.safe_fraction_for(j));
  std::sort(cuts.begin(), cuts.end());
  double shared = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double width = cuts[k + 1] - cuts[k];
    if (width > 0.0 && mask_from_shared_draw(behavior, n_costs, 0.5 * (cuts[k] + cuts[k + 1])) == mask) shared += width;
  }
  return behavior.coupling * shared + (1.0 - behavior.coupling) * independent;
}

TransitionRecord Dataset::record(std::size_t i) const {
  TransitionRecord rec;
  const auto o = obs_row(i);
  const auto no = next_obs_row(i);
  rec.obs.assign(o.begin(), o.end());
  rec.next_obs.assign(no.begin(), no.end());
  rec.action = action[i];
  rec.reward = reward[i];
  for (std::size_t j = 0; j < header.n_costs; ++j) rec.costs.push_back(cost(i, j));
  rec.done = done[i] != 0;
  rec.episode_id = episode_id[i];
  return rec;
}

void Dataset::validate() const {
  const std::size_t n = header.n_transitions;
  if (action.size() != n || reward.size() != n || done.size() != n || episode_id.size() != n ||
      obs.size() != n * header.obs_dim || next_obs.size() != n * header.obs_dim || costs.size() != n * header.n_costs) {
    throw DataError(DataErrorKind::length_disagreement, "dataset columns disagree with header n_transitions");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (episode_id[i] != episode_id[i - 1] && episode_id[i] != episode_id[i - 1] + 1) {
      throw DataError(DataErrorKind::bad_header, "episode ids are not contiguous at row " + std::to_string(i));
    }
  }
}

namespace {

void append_episode(Dataset& ds, const CmdpSpec& env, const BehaviorPolicySpec& behavior, std::uint32_t episode,
                    std::uint64_t seed, std::size_t max_rows) {
  RngStream rng(seed, "dataset.episode", episode);
  std::size_t mask = 0;
  if (behavior.coupling > 0.0 && rng.uniform() < behavior.coupling) {
    mask = mask_from_shared_draw(behavior, env.n_costs, rng.uniform());
  } else {
    for (std::size_t j = 0; j < env.n_costs; ++j) {
      if (rng.uniform() < behavior.safe_fraction_for(j)) mask |= std::size_t{1} << j;
    }
  }
  const ActionSelector select = [&](std::size_t s, RngStream& r) {
    if (r.uniform() < behavior.epsilon_explore) return r.below(env.n_actions);
    return env.scripted_actions[mask][s];
  };
  const Trajectory traj = rollout(env, select, rng);
  for (const auto& step : traj.steps) {
    if (ds.size() >= max_rows) return;
    const std::size_t obs_offset = ds.obs.size();
    ds.obs.resize(obs_offset + env.n_states, 0.0F);
    ds.obs[obs_offset + step.state] = 1.0F;
    ds.next_obs.resize(obs_offset + env.n_states, 0.0F);
    ds.next_obs[obs_offset + step.next_state] = 1.0F;
    ds.action.push_back(static_cast<std::uint32_t>(step.action));
    ds.reward.push_back(static_cast<float>(step.reward));
    for (double c : step.costs) ds.costs.push_back(static_cast<float>(c));
    ds.done.push_back(step.done ? 1 : 0);
    ds.episode_id.push_back(episode);
  }
}

Dataset empty_dataset(const CmdpSpec& env, const BehaviorPolicySpec& behavior, std::uint64_t seed) {
  env.validate();
  behavior.validate();
  if (env.scripted_actions.size() != (std::size_t{1} << env.n_costs)) {
    throw ConfigError(env.name + ": environment lacks scripted behavior profiles");
  }
  if (!behavior.channel_safe_fractions.empty() && behavior.channel_safe_fractions.size() != env.n_costs) {
    throw ConfigError("behavior.channel_safe_fractions needs one entry per cost channel (" +
                      std::to_string(env.n_costs) + ")");
  }
  Dataset ds;
  ds.header.env_name = env.name;
  ds.header.obs_dim = static_cast<std::uint32_t>(env.obs_dim());
  ds.header.n_actions = static_cast<std::uint32_t>(env.n_actions);
  ds.header.n_costs = static_cast<std::uint32_t>(env.n_costs);
  ds.header.behavior_mix = behavior.safe_fraction;
  ds.header.gen_seed = seed;
  return ds;
}

}  // namespace

Dataset generate_dataset(const CmdpSpec& env, const BehaviorPolicySpec& behavior, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("generate_dataset: n_episodes must be at least 1");
  Dataset ds = empty_dataset(env, behavior, seed);
  for (int k = 0; k < n_episodes; ++k) {
    append_episode(ds, env, behavior, static_cast<std::uint32_t>(k), seed, std::numeric_limits<std::size_t>::max());
  }
  ds.header.n_transitions = ds.size();
  return ds;
}

Dataset generate_dataset_transitions(const CmdpSpec& env, const BehaviorPolicySpec& behavior,
                                     std::size_t n_transitions, std::uint64_t seed) {
  if (n_transitions < 1) throw ConfigError("generate_dataset_transitions: n_transitions must be at least 1");
  Dataset ds = empty_dataset(env, behavior, seed);
  for (std::uint32_t k = 0; ds.size() < n_transitions; ++k) append_episode(ds, env, behavior, k, seed, n_transitions);
  ds.header.n_transitions = ds.size();
  return ds;
}

std::vector<unsigned char> encode_dataset(const Dataset& ds) {
  ds.validate();
  const json header = {{"env_name", ds.header.env_name},       {"obs_dim", ds.header.obs_dim},
                       {"n_actions", ds.header.n_actions},     {"n_costs", ds.header.n_costs},
                       {"n_transitions", ds.header.n_transitions}, {"behavior_mix", ds.header.behavior_mix},
                       {"gen_seed", ds.header.gen_seed}};
  binio::ByteWriter w;
  w.put_array<float>(ds.obs);
  w.put_array<std::uint32_t>(ds.action);
  w.put_array<float>(ds.reward);
  w.put_array<float>(ds.costs);
  w.put_array<float>(ds.next_obs);
  w.put_array<std::uint8_t>(ds.done);
  w.put_array<std::uint32_t>(ds.episode_id);
  return binio::encode_container(kDatasetMagic, kDatasetVersion, header.dump(), w.bytes());
}

namespace {

DatasetHeader parse_header(const std::string& text) {
  try {
    const json j = json::parse(text);
    DatasetHeader h;
    h.env_name = j.at("env_name").get<std::string>();
    h.obs_dim = j.at("obs_dim").get<std::uint32_t>();
    h.n_actions = j.at("n_actions").get<std::uint32_t>();
    h.n_costs = j.at("n_costs").get<std::uint32_t>();
    h.n_transitions = j.at("n_transitions").get<std::uint64_t>();
    h.behavior_mix = j.at("behavior_mix").get<double>();
    h.gen_seed = j.at("gen_seed").get<std::uint64_t>();
    return h;
  } catch (const json::exception& e) {
    throw DataError(DataErrorKind::bad_header, e.what());
  }
}

std::size_t payload_bytes(const DatasetHeader& h) {
  const std::size_t n = h.n_transitions;
  return n * h.obs_dim * 4 * 2 + n * 4 + n * 4 + n * h.n_costs * 4 + n + n * 4;
}

}  // namespace

Dataset decode_dataset(std::span<const unsigned char> bytes) {
  const auto container = binio::decode_container(bytes, kDatasetMagic, kDatasetVersion, [](const std::string& text) {
    return payload_bytes(parse_header(text));
  });
  Dataset ds;
  ds.header = parse_header(container.header_json);
  const std::size_t n = ds.header.n_transitions;
  binio::ByteReader r(container.payload);
  ds.obs = r.get_array<float>(n * ds.header.obs_dim);
  ds.action = r.get_array<std::uint32_t>(n);
  ds.reward = r.get_array<float>(n);
  ds.costs = r.get_array<float>(n * ds.header.n_costs);
  ds.next_obs = r.get_array<float>(n * ds.header.obs_dim);
  ds.done = r.get_array<std::uint8_t>(n);
  ds.episode_id = r.get_array<std::uint32_t>(n);
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) { binio::write_file(path, encode_dataset(ds)); }

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(binio::read_file(path)); }

std::vector<std::size_t> sample_minibatch(const Dataset& ds, std::size_t batch_size, RngStream& rng) {
  if (batch_size < 1 || batch_size > ds.size()) {
    throw ConfigError("batch_size " + std::to_string(batch_size) + " must lie in [1, N=" + std::to_string(ds.size()) +
                      "]");
  }
  std::vector<std::size_t> idx(batch_size);
  for (auto& i : idx) i = rng.below(ds.size());
  return idx;
}

void check_dataset_matches(const Dataset& ds, const CmdpSpec& env) {
  if (ds.header.env_name != env.name || ds.header.obs_dim != env.obs_dim() || ds.header.n_actions != env.n_actions ||
      ds.header.n_costs != env.n_costs) {
    throw DataError(DataErrorKind::dims_mismatch,
                    "dataset (" + ds.header.env_name + ", obs_dim=" + std::to_string(ds.header.obs_dim) +
                        ", n_actions=" + std::to_string(ds.header.n_actions) + ", n_costs=" +
                        std::to_string(ds.header.n_costs) + ") does not match environment " + env.name + " (obs_dim=" +
                        std::to_string(env.obs_dim()) + ", n_actions=" + std::to_string(env.n_actions) +
                        ", n_costs=" + std::to_string(env.n_costs) + ")");
  }
}

}  // namespace lexisafe
