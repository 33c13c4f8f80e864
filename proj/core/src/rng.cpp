#include "pushsum/rng.hpp"

namespace pushsum {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng Rng::derive(std::uint64_t global_seed, std::uint64_t node, Stream stream) {
  std::uint64_t h = splitmix64(global_seed);
  h = splitmix64(h ^ (node + 0x632BE59BD9B4E019ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  return Rng(h);
}

double Rng::uniform01() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open01() {
  for (;;) {
    const double u = uniform01();
    if (u > 0.0) return u;
  }
}

double Rng::uniform(double lo, double hi) {
  for (;;) {
    const double v = lo + (hi - lo) * uniform_open01();
    if (v > lo && v < hi) return v;
  }
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = engine_();
    if (v < limit) return v % bound;
  }
}

}  // namespace pushsum
