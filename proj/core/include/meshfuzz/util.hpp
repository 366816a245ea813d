// SPDX-License-Identifier: Apache-2.0
#ifndef MESHFUZZ_UTIL_HPP_
#define MESHFUZZ_UTIL_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace meshfuzz {

using Bytes = std::vector<std::uint8_t>;

std::string hex_encode(std::span<const std::uint8_t> data);
Bytes hex_decode(const std::string& hex);  // throws std::invalid_argument on bad input

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic RNG used by every engine and campaign. All derived draws go
// through explicit integer arithmetic on the raw mt19937_64 stream, so the
// byte-level behavior is identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). n must be > 0. Modulo bias is negligible for the
  // small ranges used here and keeps the draw sequence trivially portable.
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Always consumes exactly one draw regardless of p.
  bool chance(double p) { return next_double() < p; }

  // Uniform value of the given bit width (1..64).
  std::uint64_t next_bits(unsigned bits) {
    std::uint64_t v = next_u64();
    return bits >= 64 ? v : (v & ((std::uint64_t{1} << bits) - 1));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace meshfuzz

#endif  // MESHFUZZ_UTIL_HPP_
