#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace vimkit {

namespace detail {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace detail

// Derives an independent child seed from (base, salt). Used to give folds,
// replications and learner fits their own streams; documented so that report
// files are reproducible across platforms.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return detail::mix64(base + detail::mix64(salt + detail::kGolden));
}

// Counter-based generator: output i is mix64(seed + (i+1)*golden), the
// SplitMix64 stream of the seed. State is only the seed and a counter, so
// streams can be split and replayed deterministically on any platform.
//
// Uniform doubles take the top 53 bits; normal deviates use Box-Muller with
// the second variate of each pair cached. This is the single source of
// randomness in the project.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() {
    return detail::mix64(seed_ + (++counter_) * detail::kGolden);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, bound) without modulo bias (rejection sampling).
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Standard normal via Box-Muller; u1 is kept away from 0 so log(u1) is finite.
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = std::max(next_double(), 0x1.0p-53);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace vimkit
