#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pmcqa {

// Deterministic random source. All distribution code lives here rather than in
// <random> distributions, whose output is implementation-defined; mt19937_64
// itself is pinned by the standard, so streams are reproducible across
// platforms and toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n must be positive. Masked rejection keeps the
  // draw unbiased with a deterministic stream.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller. Consumes exactly two uniforms per call so
  // stream replay never depends on cached state.
  double gaussian();

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream seed from a parent seed plus tags. Used to
  // give every purpose (init, shuffle, negatives, masks) and every
  // (epoch, batch) coordinate its own stream, so changing how much one
  // consumer draws never perturbs the others.
  static std::uint64_t fold(std::uint64_t seed, std::string_view tag);
  static std::uint64_t fold(std::uint64_t seed, std::uint64_t value);

 private:
  std::mt19937_64 engine_;
};

}  // namespace pmcqa
