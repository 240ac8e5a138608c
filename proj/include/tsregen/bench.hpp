#pragma once

#include <cstdint>
#include <numbers>

#include "tsregen/cube.hpp"

namespace tsregen::data {

// S_i(k) = A_i * sin(w_i * k + phi_i) with parameters drawn per series.
struct SinusoidSpec {
  std::size_t count = 10;
  std::size_t length = 16;
  double freq_lo = 1.0, freq_hi = 5.0;
  double amp_lo = 0.1, amp_hi = 0.9;
  double phase_lo = -std::numbers::pi, phase_hi = std::numbers::pi;
};

TimeSeriesCube make_sinusoid_bench(const SinusoidSpec& spec, std::uint64_t seed);

// Cumulative sums of small Gaussian increments, smoothed by a centered
// moving average of width 3 and rescaled into [0, 1].
TimeSeriesCube make_smooth_bench(std::size_t count, std::size_t length, std::uint64_t seed,
                                 double increment_std = 1.0);

// Least-squares fit of y(k) = amplitude * sin(freq * k + phase) + offset over
// the identifiable frequency band (0, pi]. r2 is 1 - SS_res/SS_tot.
struct SinusoidFit {
  double amplitude = 0.0;
  double freq = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  double r2 = 0.0;
};

SinusoidFit fit_sinusoid(const double* y, std::size_t n);

}  // namespace tsregen::data
