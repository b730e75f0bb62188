#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace hyperking {

/// splitmix64 mix of a base seed and a stream index. Used to derive
/// independent, reproducible seeds for sub-tasks (per cube, per epoch, ...).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded generator with distribution transforms written out explicitly, so
/// sequences are identical across standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Box-Muller transform.
  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hyperking
