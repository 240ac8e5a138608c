#include "tsregen/bench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tsregen/rng.hpp"

namespace tsregen::data {

TimeSeriesCube make_sinusoid_bench(const SinusoidSpec& spec, std::uint64_t seed) {
  if (spec.count == 0 || spec.length == 0)
    throw std::invalid_argument("make_sinusoid_bench: count and length must be positive");
  RngStream rng(seed);
  TimeSeriesCube cube;
  cube.pattern = Pattern::non_cyclic;
  cube.variables = {"signal"};
  for (std::size_t i = 0; i < spec.count; ++i) {
    double freq = rng.uniform(spec.freq_lo, spec.freq_hi);
    double amp = rng.uniform(spec.amp_lo, spec.amp_hi);
    double phase = rng.uniform(spec.phase_lo, spec.phase_hi);
    UnitSeries u;
    u.id = static_cast<long long>(i + 1);
    u.length = spec.length;
    u.values.resize(spec.length);
    for (std::size_t k = 0; k < spec.length; ++k)
      u.values[k] = amp * std::sin(freq * static_cast<double>(k) + phase);
    cube.units.push_back(std::move(u));
  }
  return cube;
}

TimeSeriesCube make_smooth_bench(std::size_t count, std::size_t length, std::uint64_t seed,
                                 double increment_std) {
  if (count == 0 || length == 0)
    throw std::invalid_argument("make_smooth_bench: count and length must be positive");
  RngStream rng(seed);
  TimeSeriesCube cube;
  cube.pattern = Pattern::non_cyclic;
  cube.variables = {"signal"};
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> walk(length);
    double acc = 0.0;
    for (std::size_t k = 0; k < length; ++k) {
      acc += increment_std * rng.normal();
      walk[k] = acc;
    }
    // Centered moving average of width 3; ends average the available pair.
    std::vector<double> smooth(length);
    for (std::size_t k = 0; k < length; ++k) {
      double s = walk[k];
      double n = 1.0;
      if (k > 0) {
        s += walk[k - 1];
        n += 1.0;
      }
      if (k + 1 < length) {
        s += walk[k + 1];
        n += 1.0;
      }
      smooth[k] = s / n;
    }
    double lo = *std::min_element(smooth.begin(), smooth.end());
    double hi = *std::max_element(smooth.begin(), smooth.end());
    double range = hi - lo;
    UnitSeries u;
    u.id = static_cast<long long>(i + 1);
    u.length = length;
    u.values.resize(length);
    for (std::size_t k = 0; k < length; ++k)
      u.values[k] = range > 0.0 ? (smooth[k] - lo) / range : 0.0;
    cube.units.push_back(std::move(u));
  }
  return cube;
}

namespace {

// Linear least squares of y on {sin(wk), cos(wk), 1}; returns SS_res and the
// coefficients through the out parameters.
double lls_residual(const double* y, std::size_t n, double w, double& a, double& b, double& c) {
  double s_ss = 0, s_cc = 0, s_sc = 0, s_s = 0, s_c = 0;
  double s_ys = 0, s_yc = 0, s_y = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double sk = std::sin(w * static_cast<double>(k));
    double ck = std::cos(w * static_cast<double>(k));
    s_ss += sk * sk;
    s_cc += ck * ck;
    s_sc += sk * ck;
    s_s += sk;
    s_c += ck;
    s_ys += y[k] * sk;
    s_yc += y[k] * ck;
    s_y += y[k];
  }
  double nn = static_cast<double>(n);
  // Solve the 3x3 normal equations by Cramer's rule.
  double m[3][3] = {{s_ss, s_sc, s_s}, {s_sc, s_cc, s_c}, {s_s, s_c, nn}};
  double rhs[3] = {s_ys, s_yc, s_y};
  double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
               m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
               m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-12) {
    a = b = 0.0;
    c = s_y / nn;
  } else {
    auto solve = [&](int col) {
      double t[3][3];
      for (int r = 0; r < 3; ++r)
        for (int cc2 = 0; cc2 < 3; ++cc2) t[r][cc2] = cc2 == col ? rhs[r] : m[r][cc2];
      return (t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) -
              t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0]) +
              t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0])) /
             det;
    };
    a = solve(0);
    b = solve(1);
    c = solve(2);
  }
  double ss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double sk = std::sin(w * static_cast<double>(k));
    double ck = std::cos(w * static_cast<double>(k));
    double r = y[k] - (a * sk + b * ck + c);
    ss += r * r;
  }
  return ss;
}

}  // namespace

SinusoidFit fit_sinusoid(const double* y, std::size_t n) {
  if (n < 4) throw std::invalid_argument("fit_sinusoid: need at least 4 samples");
  double mean = 0.0;
  for (std::size_t k = 0; k < n; ++k) mean += y[k];
  mean /= static_cast<double>(n);
  double ss_tot = 0.0;
  for (std::size_t k = 0; k < n; ++k) ss_tot += (y[k] - mean) * (y[k] - mean);

  SinusoidFit fit;
  if (ss_tot < 1e-18) {
    fit.offset = mean;
    return fit;  // constant series: no sinusoid evidence
  }

  // Sampled sinusoids are identifiable only up to aliasing, so the search
  // covers (0, pi]; frequencies above pi fold onto 2*pi - w with a phase flip.
  double best_w = 0.0, best_ss = std::numeric_limits<double>::infinity();
  double a = 0, b = 0, c = 0;
  const double w_lo = 0.05, w_hi = std::numbers::pi;
  const double step = 0.005;
  for (double w = w_lo; w <= w_hi; w += step) {
    double ss = lls_residual(y, n, w, a, b, c);
    if (ss < best_ss) {
      best_ss = ss;
      best_w = w;
    }
  }
  // Local refinement around the grid winner.
  double lo = std::max(w_lo, best_w - step), hi = std::min(w_hi, best_w + step);
  for (int iter = 0; iter < 40; ++iter) {
    double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    double s1 = lls_residual(y, n, m1, a, b, c);
    double s2 = lls_residual(y, n, m2, a, b, c);
    if (s1 < s2)
      hi = m2;
    else
      lo = m1;
  }
  best_w = 0.5 * (lo + hi);
  best_ss = lls_residual(y, n, best_w, a, b, c);

  fit.freq = best_w;
  fit.amplitude = std::hypot(a, b);
  fit.phase = std::atan2(b, a);
  fit.offset = c;
  fit.r2 = 1.0 - best_ss / ss_tot;
  return fit;
}

}  // namespace tsregen::data
