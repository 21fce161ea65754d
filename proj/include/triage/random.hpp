#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace triage {

// Counter-based generator: draw i of a stream is mix(key, i), so results do
// not depend on which thread consumes a stream or in what order streams are
// used. Distributions are written out here because the standard library's
// are implementation-defined and would break cross-platform reproducibility.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc908ULL)) {}

  /// Independent stream derived from this one by a label ("mask", "noise", ...).
  CounterRng substream(std::string_view label) const {
    return CounterRng(key_, fnv1a(label));
  }
  CounterRng substream(std::uint64_t index) const {
    return CounterRng(key_, mix(index + 0x9e3779b97f4a7c15ULL));
  }

  std::uint64_t next_u64() {
    return mix(key_ ^ mix(++counter_ * 0x9e3779b97f4a7c15ULL));
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Standard normal via Box-Muller (one value per pair of uniforms).
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : text) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  CounterRng(std::uint64_t parent_key, std::uint64_t salt)
      : key_(mix(parent_key ^ mix(salt))) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace triage
