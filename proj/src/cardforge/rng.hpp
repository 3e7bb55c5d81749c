#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "cardforge/hashing.hpp"

namespace cardforge {

// mt19937_64 has a standard-mandated output sequence; the helpers below avoid
// the implementation-defined std distributions so sampling is identical on
// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

  /// Uniform double in [0, 1).
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool coin() { return (next() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

/// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  if (k > n) k = n;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

/// Seed for a named sub-stream; depends only on the run seed and the labels,
/// never on processing order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view a, std::string_view b = {}) {
  ordered_json parts = ordered_json::array({seed, a, b});
  return digest_u64(canonical_dump(parts));
}

}  // namespace cardforge
