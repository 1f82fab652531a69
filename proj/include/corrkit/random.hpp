#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace corrkit {

// Portable seeded generator. std::mt19937_64 output is fixed by the standard;
// the distributions below are spelled out so results do not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, bound), bound > 0 (rejection sampling, unbiased).
  std::uint64_t below(std::uint64_t bound);
  // Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double gaussian();

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Incremental FNV-1a 64 hasher with a splitmix64 finalizer; used to derive
// per-work-item seeds from (global seed, video id, frame indices, ...).
class SeedHasher {
 public:
  explicit SeedHasher(std::uint64_t seed = 0) { add(seed); }
  SeedHasher& add(std::uint64_t v);
  SeedHasher& add(std::string_view s);
  std::uint64_t finish() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace corrkit
