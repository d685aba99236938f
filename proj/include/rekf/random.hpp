#pragma once

// Deterministic seed derivation.  Every random stream in the workbench is
// keyed as stream(base_seed, cell, realization, role) so that serial and
// parallel execution consume identical sequences.

#include <cstdint>
#include <random>
#include <string_view>

namespace rekf {

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}
}  // namespace detail

inline std::uint64_t hash_key(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  std::uint64_t h = detail::mix64(base + 0x9e3779b97f4a7c15ull);
  h = detail::mix64(h ^ (a + 0x9e3779b97f4a7c15ull));
  h = detail::mix64(h ^ (b + 0x6a09e667f3bcc909ull));
  h = detail::mix64(h ^ (c + 0x3c6ef372fe94f82bull));
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace rekf
