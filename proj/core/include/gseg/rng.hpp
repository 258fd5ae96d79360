#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "gseg/tensor.hpp"

namespace gseg {

/// Seeded generator whose output is identical on every platform:
/// mt19937_64 is fully specified, and the real/integer mappings below avoid
/// the implementation-defined standard distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  /// Independent child stream, e.g. one per sample or per seed.
  Rng fork() { return Rng(next() ^ 0x9e3779b97f4a7c15ULL); }

 private:
  std::mt19937_64 engine_;
};

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false);

}  // namespace gseg
