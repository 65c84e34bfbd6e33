#ifndef HETLOGIT_RANDOM_HPP
#define HETLOGIT_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace hetlogit {

// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for stream `index` of `parent`. Distinct (parent, index) pairs give
// statistically unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix_seed(mix_seed(parent) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

// Thin wrapper over mt19937_64 with distribution code written out explicitly so
// draws are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer on [0, n).
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  // Standard Gumbel via inverse CDF.
  double gumbel() { return -std::log(-std::log(uniform_open())); }

  double normal() {
    // Box-Muller; one value discarded to keep the stream stateless.
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hetlogit

#endif  // HETLOGIT_RANDOM_HPP
