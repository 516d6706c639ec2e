#pragma once

// Deterministic pseudo-random source: xoshiro256++ seeded through
// splitmix64. One Rng instance per logical stream (chain, grid point,
// generated-quantity draw); streams are derived from a base seed with
// derive_seed so results are reproducible regardless of scheduling.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace causalsens {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mix a base seed with up to three stream indices into a new seed.
/// Distinct index tuples give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t i0, std::uint64_t i1 = 0,
                                 std::uint64_t i2 = 0) {
  std::uint64_t s = base;
  s ^= splitmix64(i0 += 0x632be59bd9b4e019ULL);
  s = splitmix64(s);
  s ^= splitmix64(i1 += 0x9e3779b97f4a7c15ULL);
  s = splitmix64(s);
  s ^= splitmix64(i2 += 0xd1b54a32d192ed03ULL);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0,1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on {lo, ..., hi} inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw std::domain_error("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // multiply-shift bounded draw; bias < 2^-64, irrelevant at our scales
    const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * span;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

  /// Standard normal via the Marsaglia polar method (second draw cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int bernoulli(double p) {
    if (!(p >= 0.0) || !(p <= 1.0)) throw std::domain_error("bernoulli: p must lie in [0,1]");
    return uniform() < p ? 1 : 0;
  }

  /// Index draw proportional to nonnegative weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights) {
    if (weights.empty()) throw std::domain_error("categorical: empty weights");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::domain_error("categorical: negative weight");
      total += w;
    }
    if (!(total > 0.0)) throw std::domain_error("categorical: weights sum to zero");
    double u = uniform() * total;
    for (std::size_t k = 0; k + 1 < weights.size(); ++k) {
      u -= weights[k];
      if (u < 0.0) return k;
    }
    return weights.size() - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace causalsens
