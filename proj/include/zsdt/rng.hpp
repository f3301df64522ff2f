#pragma once

#include <cstdint>
#include <initializer_list>

namespace zsdt {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Mixes a base seed with coordinates (repeat, fold, cell, ...) into an
/// independent stream seed.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t h = splitmix64(base);
  for (auto c : coords) h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
  return h;
}

}  // namespace zsdt
