#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hvf {

/// Independent stream keyed by a tuple of integers (each split into 32-bit
/// halves for std::seed_seq).
inline std::mt19937_64 derive_rng(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  words.reserve(keys.size() * 2);
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace hvf
