#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace lexisafe {

std::uint64_t fnv1a64(std::string_view text, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);

/// Deterministic random stream identified by (seed, name, index).
///
/// Streams with different names or indices are statistically independent, so
/// components can draw from their own stream without coupling through call
/// order (e.g. per-network initialization, per-episode rollouts).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n).
  std::size_t below(std::size_t n);
  /// Sample an index from a probability vector (assumed normalized).
  std::size_t categorical(std::span<const double> probs);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lexisafe
