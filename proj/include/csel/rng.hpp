#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace csel {

// Deterministic sampling on top of mt19937_64. The engine's output sequence is
// fixed by the standard; the distributions are not, so every draw here is
// hand-rolled to keep results identical across platforms and library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, n), rejection-sampled to remove modulo bias.
  uint64_t below(uint64_t n);

  // Uniform in [0, 1) with 53 bits of mantissa.
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi], inclusive.
  int64_t range(int64_t lo, int64_t hi);

  // Index drawn proportionally to the (nonnegative) weights.
  size_t weighted(const std::vector<double>& weights);

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

// Stable per-stage seed derivation: fnv1a of the salt folded into the base seed.
uint64_t salted_seed(uint64_t base, std::string_view salt);

}  // namespace csel
