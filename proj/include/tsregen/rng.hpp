#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace tsregen {

// Deterministic random stream (splitmix64 core). Every stochastic routine in
// the library draws from an explicitly seeded stream, so a whole run is
// reproducible from a single master seed on any platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller; consumes draws in pairs.
  double normal();

  // Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Stable per-stage seed derived from a master seed and a stage label.
  static std::uint64_t derive(std::uint64_t master, std::string_view label);

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tsregen
