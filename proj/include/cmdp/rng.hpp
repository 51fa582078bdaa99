#pragma once
// Deterministic random number generation.
//
// All stochastic components of the library route through this generator so
// that a seed fully determines every sample on every platform.  The standard
// library's distribution objects are implementation-defined (libstdc++ and
// libc++ produce different streams), so the distributions needed here are
// implemented explicitly:
//
//   engine         xoshiro256++ (Blackman & Vigna), seeded via splitmix64
//   uniform        53-bit mantissa construction in [0,1)
//   normal         Box-Muller (two uniforms per variate, no cached state)
//   gamma          Marsaglia-Tsang squeeze; shape<1 via the boost identity
//   beta           ratio of two gammas
//   dirichlet      normalized gammas
//   categorical    CDF scan with terminal fallback
//
// The full engine state is four 64-bit words and round-trips through
// checkpoints exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "cmdp/errors.hpp"

namespace cmdp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Mixes an arbitrary list of 64-bit values into one seed word.  Used to derive
// independent streams, e.g. (config seed, run seed, stream tag).
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t acc = 0x8000000080001000ull;
  for (std::uint64_t p : parts) {
    acc ^= p + 0x9E3779B97F4A7C15ull + (acc << 6) + (acc >> 2);
    (void)splitmix64(acc);
  }
  return acc;
}

class rng {
 public:
  using state_type = std::array<std::uint64_t, 4>;

  explicit rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  const state_type& state() const noexcept { return s_; }
  void set_state(const state_type& st) noexcept { s_ = st; }

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

  // Uniform on [0,1) with 53 random mantissa bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in {0, ..., n-1} via the multiply-shift reduction.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, errc::precondition, "rng.below: n must be positive");
    return std::uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0,1], keeps the log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(shape, 1).  Marsaglia-Tsang for shape >= 1; for shape < 1 uses
  // Gamma(a) = Gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    require(shape > 0.0 && std::isfinite(shape), errc::precondition,
            "rng.gamma: shape must be positive and finite");
    if (shape < 1.0) {
      const double u = 1.0 - uniform();  // (0,1]
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    const double s = x + y;
    if (s <= 0.0) return 0.5;  // both gammas underflowed; astronomically rare
    return x / s;
  }

  // Symmetric Dirichlet when given (dim, concentration); writes into out.
  void dirichlet(const std::vector<double>& concentration, std::vector<double>& out) {
    out.resize(concentration.size());
    for (;;) {
      double sum = 0.0;
      for (std::size_t i = 0; i < concentration.size(); ++i) {
        out[i] = gamma(concentration[i]);
        sum += out[i];
      }
      if (sum > 1e-300) {
        for (auto& v : out) v /= sum;
        return;
      }
    }
  }

  // Index sampled proportionally to probs (assumed nonnegative, summing to ~1).
  // The final index absorbs any floating-point shortfall.
  template <class Vec>
  int categorical(const Vec& probs) {
    const double u = uniform();
    double acc = 0.0;
    const int n = int(probs.size());
    for (int i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return n - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  state_type s_{};
};

}  // namespace cmdp
