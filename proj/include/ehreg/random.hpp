#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ehreg {

/// SplitMix64 finalizer; used to decorrelate user seeds before seeding engines.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the index-th child stream of `seed` (seed + index, then mixed).
/// Children of distinct indices are independent of each other and of the
/// order in which they are created.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed + index) ^ 0xD1B54A32D192ED03ULL);
}

/// A seeded random stream with the handful of variates the samplers need.
///
/// Rates, not scales, parameterize the gamma family here, matching the
/// Ga(shape, rate) notation used throughout the samplers.
class RngStream {
 public:
  using engine_type = std::mt19937_64;

  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent child stream; see derive_seed.
  RngStream child(std::uint64_t index) const { return RngStream(derive_seed(seed_, index)); }

  engine_type& engine() noexcept { return engine_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return normal_(engine_); }

  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

  /// Ga(shape, rate): density proportional to x^{shape-1} exp(-rate x).
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0);
    return g(engine_) / rate;
  }

  /// IG(shape, scale): the reciprocal of Ga(shape, scale).
  double inv_gamma(double shape, double scale) {
    std::gamma_distribution<double> g(shape, 1.0);
    return scale / g(engine_);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> d(0, n - 1);
    return d(engine_);
  }

 private:
  std::uint64_t seed_;
  engine_type engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ehreg
