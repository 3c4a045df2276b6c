#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dmoe {

using Rng = std::mt19937_64;

// Independent stream for a (seed, tag...) tuple. Streams depend only on the
// tuple, never on scheduling or call order.
inline Rng make_rng(std::initializer_list<std::uint64_t> key) {
  std::vector<std::uint32_t> words;
  words.reserve(key.size() * 2);
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Stream tags, so distinct consumers of one seed never share draws.
namespace stream {
inline constexpr std::uint64_t kChannel = 0x43484e4c;  // "CHNL"
inline constexpr std::uint64_t kGating = 0x47415445;   // "GATE"
inline constexpr std::uint64_t kInit = 0x494e4954;     // "INIT"
}  // namespace stream

}  // namespace dmoe
