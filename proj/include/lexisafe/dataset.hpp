#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lexisafe/environment.hpp"
#include "lexisafe/rng.hpp"

namespace lexisafe {

/// Per-episode mixture of scripted policies with epsilon-uniform exploration.
/// An episode avoids cost channel j with probability safe_fraction (or
/// channel_safe_fractions[j] when given). With probability coupling the
/// channels share one uniform draw, so careless episodes tend to be careless
/// on every channel; otherwise the channels are drawn independently.
struct BehaviorPolicySpec {
  double safe_fraction = 0.5;
  double epsilon_explore = 0.1;
  std::vector<double> channel_safe_fractions;
  double coupling = 0.0;

  double safe_fraction_for(std::size_t j) const {
    return channel_safe_fractions.empty() ? safe_fraction : channel_safe_fractions.at(j);
  }
  void validate() const;
};

/// Action distribution of the scripted profile `mask` in `state`, including
/// exploration.
std::vector<double> scripted_action_probs(const CmdpSpec& env, std::size_t mask, double epsilon, std::size_t state);

/// Probability that an episode is assigned profile `mask`.
double profile_probability(const BehaviorPolicySpec& behavior, std::size_t n_costs, std::size_t mask);

struct DatasetHeader {
  std::string env_name;
  std::uint32_t obs_dim = 0;
  std::uint32_t n_actions = 0;
  std::uint32_t n_costs = 0;
  std::uint64_t n_transitions = 0;
  double behavior_mix = 0.0;
  std::uint64_t gen_seed = 0;

  bool operator==(const DatasetHeader&) const = default;
};

struct TransitionRecord {
  std::vector<double> obs;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> costs;
  std::vector<double> next_obs;
  bool done = false;
  std::uint32_t episode_id = 0;
};

/// Columnar offline dataset. Storage precision matches the on-disk format
/// (32-bit floats); accessors widen to double.
struct Dataset {
  DatasetHeader header;
  std::vector<float> obs;       // N * obs_dim
  std::vector<std::uint32_t> action;
  std::vector<float> reward;
  std::vector<float> costs;     // N * n_costs
  std::vector<float> next_obs;  // N * obs_dim
  std::vector<std::uint8_t> done;
  std::vector<std::uint32_t> episode_id;

  std::size_t size() const { return action.size(); }
  std::span<const float> obs_row(std::size_t i) const { return {obs.data() + i * header.obs_dim, header.obs_dim}; }
  std::span<const float> next_obs_row(std::size_t i) const {
    return {next_obs.data() + i * header.obs_dim, header.obs_dim};
  }
  double cost(std::size_t i, std::size_t j) const { return costs[i * header.n_costs + j]; }
  TransitionRecord record(std::size_t i) const;

  /// Column lengths agree with the header and episode ids are contiguous.
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

/// Rolls out n_episodes episodes; deterministic in seed. Episode k draws from
/// its own stream, so the result does not depend on generation order.
Dataset generate_dataset(const CmdpSpec& env, const BehaviorPolicySpec& behavior, int n_episodes, std::uint64_t seed);

/// Generates whole episodes until at least n_transitions are collected and
/// truncates to exactly n_transitions.
Dataset generate_dataset_transitions(const CmdpSpec& env, const BehaviorPolicySpec& behavior,
                                     std::size_t n_transitions, std::uint64_t seed);

constexpr char kDatasetMagic[] = "LXSD";
constexpr std::uint32_t kDatasetVersion = 1;

std::vector<unsigned char> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const unsigned char> bytes);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// batch_size indices drawn uniformly with replacement.
std::vector<std::size_t> sample_minibatch(const Dataset& ds, std::size_t batch_size, RngStream& rng);

/// Throws DataError(dims_mismatch) if the dataset was not generated for env.
void check_dataset_matches(const Dataset& ds, const CmdpSpec& env);

}  // namespace lexisafe
