#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsregen::data {

enum class Pattern { non_cyclic, cyclic };

std::string pattern_name(Pattern p);
Pattern pattern_from_name(const std::string& name);

// One run-to-failure recording: J variables over `length` time steps,
// values row-major [j * length + k]. For non-cyclic data the unit is one
// component (engine); for cyclic data it is one cycle.
struct UnitSeries {
  long long id = 0;
  std::size_t length = 0;
  std::vector<double> values;
  // Operating-setting columns kept as side metadata (non-cyclic input only).
  std::vector<double> settings;

  double at(std::size_t variable, std::size_t k) const { return values[variable * length + k]; }
  double& at(std::size_t variable, std::size_t k) { return values[variable * length + k]; }
};

// Ragged three-dimensional arrangement of run-to-failure series
// (units x variables x time). The universal data carrier of the toolkit.
struct TimeSeriesCube {
  Pattern pattern = Pattern::non_cyclic;
  std::vector<std::string> variables;
  std::vector<UnitSeries> units;

  std::size_t variable_count() const { return variables.size(); }
  std::size_t unit_count() const { return units.size(); }
  std::size_t min_length() const;
  std::size_t max_length() const;
};

// Per-variable minimum/maximum for minimax scaling.
struct ScalingInfo {
  // range01 maps x to (x - vmin) / (vmax - vmin); `printed` divides by vmax
  // alone (compatibility variant, does not generally land in [0,1]).
  enum class Variant { range01, printed };

  std::vector<double> vmin;
  std::vector<double> vmax;
  Variant variant = Variant::range01;

  std::size_t variable_count() const { return vmin.size(); }
};

struct SegmentConfig {
  std::size_t window = 0;  // L
  std::size_t step = 1;
};

// Fixed-length overlapped windows cut from a cube, plus the per-window
// condition scalar and the parent unit they came from.
struct SegmentedWindows {
  Pattern pattern = Pattern::non_cyclic;
  std::vector<std::string> variables;
  std::size_t window = 0;
  std::vector<double> values;       // count x J x L, row-major
  std::vector<double> conditions;   // count
  std::vector<long long> parents;   // count, parent unit id
  std::vector<std::size_t> starts;  // count, window start index inside parent

  std::size_t variable_count() const { return variables.size(); }
  std::size_t count() const { return conditions.size(); }
  const double* series(std::size_t i) const {
    return values.data() + i * variable_count() * window;
  }
};

struct RulLabels {
  std::vector<std::vector<double>> per_unit;
  bool capped = false;
  double cap = 0.0;
};

}  // namespace tsregen::data
