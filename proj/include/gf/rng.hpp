#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>
#include <vector>

// Deterministic random number utilities. Two flavours:
//  - Rng: a sequential splitmix64 stream for training loops and sampling.
//  - counter_*: stateless counter-based draws, used where the same value must
//    come out for a given (seed, index) regardless of evaluation order or
//    thread count (phantom noise).

namespace gf {

inline constexpr std::uint64_t kGolden64 = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed + kGolden64 + mix64(value));
}

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

inline double u64_to_unit_double(std::uint64_t x) {
  // 53 high bits -> [0,1)
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// Counter-based uniform/gaussian draws.
inline double counter_uniform(std::uint64_t seed, std::uint64_t counter) {
  return u64_to_unit_double(mix64(seed + kGolden64 * (counter + 1)));
}

inline double counter_gaussian(std::uint64_t seed, std::uint64_t counter) {
  // Box-Muller on two counter draws.
  double u1 = counter_uniform(seed, 2 * counter);
  double u2 = counter_uniform(seed, 2 * counter + 1);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

  std::uint64_t next_u64() {
    state_ += kGolden64;
    return mix64(state_);
  }

  double uniform() { return u64_to_unit_double(next_u64()); }

  // Uniform in {0, ..., n-1}; rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586477 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    // Fisher-Yates; uses below() so results do not depend on the standard
    // library's distribution implementation.
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  // Independent named stream derived from this one's seed.
  Rng substream(std::string_view name) const {
    return Rng(hash_combine(state_, fnv1a64(name)));
  }

 private:
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

inline std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
  return hash_combine(seed, fnv1a64(name));
}

}  // namespace gf
