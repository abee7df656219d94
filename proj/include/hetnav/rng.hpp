#pragma once

#include <cstdint>
#include <random>

namespace hetnav {

/// splitmix64 step; used to whiten seeds before they reach the engine.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic random stream. All draws go through explicit bit
/// manipulation of mt19937_64 output, so sequences are identical across
/// platforms and standard library versions (std::*_distribution is
/// implementation defined and must not be used anywhere in the project).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(mix64(seed)) {}

  /// Derives an independent stream for a named purpose. Streams with
  /// different ids never share state with the parent or each other.
  static RngStream derive(std::uint64_t seed, std::uint64_t stream_id) {
    return RngStream(mix64(seed) ^ mix64(stream_id * 0x9e3779b97f4a7c15ULL + 1));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); rejection sampled, so unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

/// Stream namespaces. Training, evaluation and rollout episodes draw from
/// disjoint id ranges of the same base seed, so a test suite never replays
/// scenes seen in training.
namespace streams {
inline constexpr std::uint64_t kTrainScenario = 1;
inline constexpr std::uint64_t kTrainPolicy = 2;
inline constexpr std::uint64_t kReplay = 3;
inline constexpr std::uint64_t kParamInit = 4;
inline constexpr std::uint64_t kEvalScenario = 5;
inline constexpr std::uint64_t kRollout = 6;
}  // namespace streams

inline RngStream substream(std::uint64_t seed, std::uint64_t ns,
                           std::uint64_t index) {
  return RngStream::derive(seed, (ns << 48) ^ index);
}

}  // namespace hetnav
