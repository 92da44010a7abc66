#include "pmcqa/rng.hpp"

#include <cmath>

#include "pmcqa/errors.hpp"
#include "pmcqa/util.hpp"

namespace pmcqa {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("Rng::below requires n > 0");
  std::uint64_t mask = ~0ull;
  std::uint64_t m = n - 1;
  // Smallest all-ones mask covering n-1.
  mask >>= (m == 0) ? 63 : __builtin_clzll(m);
  while (true) {
    std::uint64_t r = next_u64() & mask;
    if (r < n) return r;
  }
}

double Rng::gaussian() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t Rng::fold(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}

std::uint64_t Rng::fold(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (value + 0x9e3779b97f4a7c15ull));
}

}  // namespace pmcqa
