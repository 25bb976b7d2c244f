#pragma once

#include <cstdint>
#include <string_view>

namespace dsch {

/// Named random sub-streams derived from one configuration seed.
enum class SeedStream : std::uint64_t {
  Init = 1,
  Gmm = 2,
  Kmeans = 3,
  Shuffle = 4,
  Augment = 5,
  Synth = 6,
  Eval = 7,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed for `stream`, further split by up to two counters (epoch, batch, ...).
constexpr std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t a = 0,
                                    std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(base ^ splitmix64(static_cast<std::uint64_t>(stream)));
  s = splitmix64(s ^ splitmix64(a + 0x1000));
  return splitmix64(s ^ splitmix64(b + 0x2000));
}

}  // namespace dsch
