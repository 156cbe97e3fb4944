#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sscc {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Stream tags separating the independent random streams drawn from one seed.
enum class Stream : std::uint64_t {
  init = 1,
  shuffle = 2,
  view = 3,
  synth = 4,
  plan = 5,
};

/// Folds a base seed, a stream tag and a list of indices into one seed.
/// Every random stream in the library is addressed this way, so results
/// never depend on the order in which streams are consumed.
inline std::uint64_t derive_seed(std::uint64_t base, Stream stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = mix64(base ^ mix64(static_cast<std::uint64_t>(stream)));
  for (std::uint64_t i : indices) h = mix64(h ^ mix64(i + 0x632BE59BD9B4E019ull));
  return h;
}

inline Rng make_rng(std::uint64_t base, Stream stream,
                    std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(derive_seed(base, stream, indices));
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

}  // namespace sscc
