#pragma once

#include <cstdint>
#include <random>

namespace dak {

// Deterministic random source. All randomized algorithms in the library draw
// through this wrapper. The mt19937_64 output sequence is fully specified by
// the standard, but the standard *distributions* are not, so the value
// transforms are done by hand here. Identical seeds therefore give
// bit-identical draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform integer in {0, ..., n - 1}. Rejection sampled, bias free.
  // Requires n > 0.
  int uniform_int(int n);

  // Standard normal deviate (Box-Muller).
  double gaussian();

  double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dak
