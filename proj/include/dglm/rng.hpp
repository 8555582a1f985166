#pragma once

#include <cstdint>
#include <random>

#include "dglm/core.hpp"

namespace dglm {

/// Deterministic random source: a Mersenne Twister (std::mt19937_64, whose
/// sequence is pinned by the C++ standard) combined with explicit transforms
/// for every distribution. Avoiding std::*_distribution keeps streams
/// identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via the Box-Muller transform (second value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]; keeps log finite
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) {
    return -std::log(1.0 - uniform()) / rate;
  }

  /// Uniform integer in {0, ..., n-1}.
  int uniform_int(int n) {
    return static_cast<int>(uniform() * static_cast<double>(n)) % n;
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Stream splitting for repetitions, rounds, and per-arm draws:
  /// a SplitMix64 mix of (master, stream) so derived streams are
  /// order-independent and collision-resistant.
  static std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Draws from N(mean, L L') given a lower-triangular factor L.
inline Vector sample_mvn(const Vector& mean, const Matrix& chol_lower,
                         Rng& rng) {
  return mean + chol_lower * rng.normal_vector(mean.size());
}

}  // namespace dglm
