#pragma once

#include <cstdint>
#include <cmath>

namespace carht {

// splitmix64; used both as a stream-derivation hash and to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from (seed, stream_id). Replications,
// strata, and pipeline stages each get their own stream so that results do
// not depend on evaluation order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream_id + 0x5851f42d4c957f2dULL));
}

// xoshiro256** by Blackman & Vigna (public domain). Hand-rolled so that
// streams are bit-reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x += 0x9e3779b97f4a7c15ULL);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform on [0,1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    // multiply-shift rejection-free mapping is fine here; modulo bias is
    // negligible for the n used (block sizes, sample sizes)
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

// Inverse-CDF samplers; keeps every tail distribution on the single
// uniform stream so fixed seeds reproduce bit-identically.
double normal_quantile(double p);  // Wichura AS241, |err| < 1e-15

inline double sample_normal(Rng& rng) {
  double u;
  do { u = rng.uniform(); } while (u <= 0.0);
  return normal_quantile(u);
}

inline double sample_laplace(Rng& rng) {
  const double u = rng.uniform() - 0.5;
  const double v = 1.0 - 2.0 * std::abs(u);
  return (u < 0 ? 1.0 : -1.0) * std::log(v > 0 ? v : 1e-300);
}

inline double sample_cauchy(Rng& rng) {
  return std::tan(M_PI * (rng.uniform() - 0.5));
}

}  // namespace carht
