// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace deepdfa {

/// Sub-seed for (root, purpose, index): FNV-1a over the purpose tag, mixed
/// with the root and index through splitmix64. Stable across versions.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                    std::uint64_t index = 0) {
  std::uint64_t tag = 0xcbf29ce484222325ULL;
  for (char c : purpose) {
    tag ^= static_cast<unsigned char>(c);
    tag *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(root ^ tag) + index);
}

}  // namespace deepdfa
