#pragma once

#include <cstdint>

namespace opgd {

/// SplitMix64 finalizer. Used both to expand a seed into generator state and
/// to derive independent substreams from a master seed.
std::uint64_t splitmix64(std::uint64_t& state);

/// Substream seed for `stream` under `master`:
///   s = master ^ (0x9E3779B97F4A7C15 * (stream + 1)); return splitmix64(s).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

/// Well-known stream tags. Every random draw in the library goes through one.
namespace streams {
inline constexpr std::uint64_t kDataInputs = 1;
inline constexpr std::uint64_t kDataLabels = 2;
inline constexpr std::uint64_t kHiddenWeights = 3;
inline constexpr std::uint64_t kOutputSigns = 4;
inline constexpr std::uint64_t kMonteCarlo = 5;
inline constexpr std::uint64_t kExperimentData = 6;
inline constexpr std::uint64_t kExperimentNet = 7;
inline constexpr std::uint64_t kConcentration = 8;
}  // namespace streams

/// xoshiro256** seeded through SplitMix64. Standard normals use the Marsaglia
/// polar method (the spare deviate is cached, so draws come in pairs).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (-1, 1).
  double uniform_signed();
  double normal();
  /// Uniform on {-1, +1}.
  double rademacher();

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace opgd
