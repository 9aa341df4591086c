#ifndef BARISTA_RANDOM_HPP
#define BARISTA_RANDOM_HPP

#include <cstdint>
#include <random>

namespace barista {

/// Seed for every stochastic routine. Same seed, same calls, same output.
struct Seed {
  std::uint64_t value = 0;
};

/// SplitMix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for stream `index` of `parent` (bootstrap replicates etc).
inline Seed derive(Seed parent, std::uint64_t index) {
  return Seed{mix64(mix64(parent.value) ^ mix64(index + 0x632be59bd9b4e019ULL))};
}

/**
 * The generator used throughout: std::mt19937_64 seeded with the raw 64-bit
 * seed. Uniforms are built from the top 53 bits so they do not depend on the
 * standard library's distribution implementation.
 */
class Rng {
 public:
  static constexpr const char* kName = "mt19937_64";

  explicit Rng(Seed seed) : engine_(seed.value) {}

  /// Uniform on [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u;
    do u = uniform(); while (u == 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index uniform on [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::uint64_t poisson(double mean) {
    if (!(mean > 0)) return 0;
    return std::poisson_distribution<std::uint64_t>(mean)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace barista

#endif  // BARISTA_RANDOM_HPP
