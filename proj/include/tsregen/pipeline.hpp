#pragma once

#include <filesystem>
#include <optional>
#include <utility>

#include "tsregen/cube.hpp"

namespace tsregen::data {

// Whitespace-delimited engine table: unit id, time index, 3 operating
// settings, then 21 sensor columns. One cube unit per engine, rows ordered
// by contiguous time index starting at 1.
TimeSeriesCube load_noncyclic_table(const std::filesystem::path& path);

// Delimited battery table with header `cycle,time,voltage,current,capacity`.
// One cube unit per cycle, ascending cycle order regardless of row order.
TimeSeriesCube load_cyclic_cycles(const std::filesystem::path& path);

// Removes every variable whose variance on the normalized scale is below
// eps. Returns the reduced cube and the removed variable names.
std::pair<TimeSeriesCube, std::vector<std::string>> drop_constant_variables(
    const TimeSeriesCube& cube, double eps = 1e-12);

// Keeps the last min(keep, K_n) samples of every unit.
TimeSeriesCube truncate_tail(const TimeSeriesCube& cube, std::size_t keep);

ScalingInfo fit_scaling(const TimeSeriesCube& cube,
                        ScalingInfo::Variant variant = ScalingInfo::Variant::range01);

struct NormalizeOptions {
  bool clip = false;
};

TimeSeriesCube normalize(const TimeSeriesCube& cube, const ScalingInfo& scaling,
                         NormalizeOptions opts = {});
TimeSeriesCube denormalize(const TimeSeriesCube& cube, const ScalingInfo& scaling);

// Normalize a single series laid out [J x length] in place.
void normalize_series(double* values, std::size_t variables, std::size_t length,
                      const ScalingInfo& scaling, NormalizeOptions opts = {});
void denormalize_series(double* values, std::size_t variables, std::size_t length,
                        const ScalingInfo& scaling);

// Sliding-window segmentation. Condition per window: normalized start index
// start/(K-L) for non-cyclic cubes, cycle/max-cycle for cyclic cubes.
SegmentedWindows segment(const TimeSeriesCube& cube, const SegmentConfig& cfg);

// Per-unit linear labels [K_i, K_i-1, ..., 1], elementwise min with cap.
// Non-cyclic cubes only.
RulLabels build_rul_labels(const TimeSeriesCube& cube, std::optional<double> cap);

}  // namespace tsregen::data
