#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace counterprobe {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// SplitMix64 finalizer; used to derive independent generator seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over bytes. Stable across platforms; not a cryptographic digest.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace counterprobe
