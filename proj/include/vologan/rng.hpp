#pragma once

// Deterministic random source. All stochastic behavior in the project draws
// from this engine so runs reproduce bit-for-bit from a seed. Distribution
// sampling is hand-rolled on top of mt19937_64 because the std distribution
// objects are not pinned down by the standard.

#include <cmath>
#include <cstdint>
#include <random>

namespace vologan {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Independent stream derived from (seed, stream tag, index); used to give
  // each epoch and purpose its own reproducible engine.
  static Rng derived(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return Rng(mix64(mix64(seed ^ (stream * 0x9e3779b97f4a7c15ULL)) + index));
  }

  std::uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // (0, 1): rejects the single zero value
  double uniform_open() {
    double u = uniform();
    while (u == 0.0) u = uniform();
    return u;
  }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    return lo + int(eng_() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

  template <class It>
  void shuffle(It first, It last) {
    const auto count = last - first;
    for (auto i = count - 1; i > 0; --i) {
      const auto j = eng_() % std::uint64_t(i + 1);
      std::swap(first[i], first[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Stream tags for derived engines.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamSplit = 2;
inline constexpr std::uint64_t kStreamEpoch = 3;
inline constexpr std::uint64_t kStreamSynth = 4;

}  // namespace vologan
