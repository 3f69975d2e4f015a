#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>

namespace semmec {

// Seeded random source. The engine is std::mt19937_64; every transform on top
// of it is written out here so streams are identical across standard
// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential() { return -std::log(uniform_open()); }

  double normal();

  std::size_t index(std::size_t n);

  std::size_t categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// splitmix64 finaliser; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b = 0);

}  // namespace semmec
