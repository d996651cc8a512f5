#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace resplan {

/// SplitMix64 finalizer; used only to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27U)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31U);
}

/// Seeded generator with a published algorithm: std::mt19937_64, with uniform
/// doubles taken from the top 53 bits. Both are fixed by the C++ standard, so
/// streams are reproducible across platforms.
class Rng {
public:
  static constexpr std::string_view kAlgorithm =
      "mt19937_64; seed(master, rep, stream) = splitmix64(splitmix64(master) ^ "
      "splitmix64(2*rep + stream + 1)); u = (next >> 11) * 2^-53";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Seed of stream `stream` (0 = transitions, 1 = policy) of replication `rep`.
  static constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t rep,
                                             std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(master) ^ splitmix64(2 * rep + stream + 1));
  }

  static Rng for_stream(std::uint64_t master, std::uint64_t rep, std::uint64_t stream) {
    return Rng(derive_seed(master, rep, stream));
  }

  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(engine_() >> 11U) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v = engine_();
    while (v >= limit) {
      v = engine_();
    }
    return v % bound;
  }

private:
  std::mt19937_64 engine_;
};

} // namespace resplan
