#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A draw is a
// pure function of (key, counter), so noise for a given TLU application does
// not depend on evaluation order or thread count.

#include <array>
#include <cstdint>

namespace hetree {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key) noexcept;

// SplitMix64 finaliser, used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

// Identifies one TLU application: input row, algorithm step, tree, node/leaf.
struct TluSite {
  std::uint64_t row = 0;
  std::uint32_t step = 0;
  std::uint32_t tree = 0;
  std::uint32_t node = 0;
};

struct TluDraw {
  double failure_u;       // uniform in [0, 1)
  double displacement_u;  // uniform in [0, 1)
};

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  TluDraw draw(const TluSite& site) const noexcept;

 private:
  PhiloxKey key_;
};

}  // namespace hetree
