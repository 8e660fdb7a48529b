#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lexisafe/approximator.hpp"

namespace lexisafe {

struct NamedNetwork {
  std::string name;
  MlpSpec spec;
  ParamVector params;

  bool operator==(const NamedNetwork&) const = default;
};

/// A set of networks plus free-form scalar metadata (lambdas, step, ...).
struct Checkpoint {
  std::string kind;  // "policy" or "train_state"
  std::vector<NamedNetwork> networks;
  std::vector<std::pair<std::string, double>> scalars;

  const NamedNetwork& network(const std::string& name) const;
  double scalar(const std::string& name) const;
  bool operator==(const Checkpoint&) const = default;
};

constexpr char kCheckpointMagic[] = "LXCK";
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lexisafe
