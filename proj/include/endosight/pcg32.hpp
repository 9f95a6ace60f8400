#pragma once

#include <cstdint>

namespace endosight {

// PCG32 (XSH-RR variant, fixed default stream). The generator is pinned so
// that seeded shuffles reproduce bit-identically across platforms and
// language ports of this toolkit.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed) {
    state_ = 0u;
    advance();
    state_ += seed;
    advance();
  }

  std::uint32_t next_u32() {
    const std::uint64_t old = state_;
    advance();
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Bounded draw as used by the Fisher-Yates shuffle: modulo, not rejection.
  std::uint32_t next_below(std::uint32_t bound) { return next_u32() % bound; }

 private:
  void advance() { state_ = state_ * kMultiplier + kIncrement; }

  static constexpr std::uint64_t kMultiplier = 6364136223846793005ull;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ull;
  std::uint64_t state_ = 0;
};

}  // namespace endosight
