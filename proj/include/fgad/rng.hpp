#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fgad {

// Splittable seeding: a stream seed is the SplitMix64 finaliser folded over
// the root seed and a path of tags, e.g. {Stream::Train, client_id}. Streams
// of distinct paths are independent, so adding a client never changes the
// randomness another client sees.
enum class Stream : std::uint64_t {
  Partition = 1,
  Synthetic = 2,
  Init = 3,
  Train = 4,
  ServerInit = 5,
  TestSample = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t tag : path) h = splitmix64(h ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, Stream s, std::initializer_list<std::uint64_t> path = {}) {
  std::uint64_t h = derive_seed(root, {static_cast<std::uint64_t>(s)});
  for (std::uint64_t tag : path) h = splitmix64(h ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
  return h;
}

using Rng = std::mt19937_64;

}  // namespace fgad
