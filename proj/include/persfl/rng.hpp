#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace persfl {

using Engine = std::mt19937_64;

// Purpose tags for independent random streams derived from one master seed.
enum class Stream : std::uint64_t {
  kClusterParams = 1,
  kFeatures = 2,
  kNoise = 3,
  kTestSet = 4,
  kValidation = 5,
  kCandidates = 6,
  kOnlineBatch = 7,
  kIfcaInit = 8,
  kRepetition = 9,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for (master, purpose, a, b). Distinct tuples give statistically
// independent streams; the mapping is fixed so outputs are reproducible.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream purpose,
                                    std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b * 0xff51afd7ed558ccdULL));
  return h;
}

inline Engine make_engine(std::uint64_t master, Stream purpose, std::uint64_t a = 0,
                          std::uint64_t b = 0) {
  return Engine(derive_seed(master, purpose, a, b));
}

// `count` distinct values drawn uniformly from `pool` (partial Fisher-Yates).
// Output order is the draw order.
inline std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool,
                                                           std::size_t count, Engine& rng) {
  const std::size_t n = pool.size();
  for (std::size_t i = 0; i < count && i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(std::min(count, n));
  return pool;
}

}  // namespace persfl
