#pragma once

#include <cstdint>
#include <random>

namespace fsclb {

// Reproducible random stream. The engine is std::mt19937_64 (bit-exact by the
// standard); the value mappings below are spelled out here because the
// std::*_distribution algorithms are implementation-defined and runs must be
// replayable scalar-for-scalar.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n) without modulo bias.
  int uniform_int(int n);

  // Standard normal via Box-Muller with a cached spare.
  double gaussian();

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 step, used to derive independent per-trial / per-purpose seeds.
std::uint64_t split_seed(std::uint64_t root, std::uint64_t stream);

}  // namespace fsclb
