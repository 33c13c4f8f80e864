#pragma once

#include <cstdint>
#include <random>

namespace pushsum {

/// Named random streams. Each node draws its weights and its encryption
/// nonces from separate streams so that turning encryption on does not
/// perturb the weight sequence.
enum class Stream : std::uint64_t {
  kWeights = 1,
  kCrypto = 2,
  kKeygen = 3,
  kInitialValues = 4,
  kTopology = 5,
};

/// Seedable generator with platform-independent real draws. std::uniform_*
/// distributions are implementation-defined, so reals are formed directly
/// from the top 53 bits of mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Stream for (global seed, node, purpose), decorrelated via SplitMix64.
  static Rng derive(std::uint64_t global_seed, std::uint64_t node,
                    Stream stream);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform01();

  /// Uniform on the open interval (0, 1).
  double uniform_open01();

  /// Uniform on (lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pushsum
