#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsregen/cube.hpp"

namespace tsregen::io {

// Flat little-endian binary arrays; the manifest next to them carries shapes.
void write_doubles(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_doubles(const std::filesystem::path& path);
void write_int64s(const std::filesystem::path& path, const std::vector<long long>& values);
std::vector<long long> read_int64s(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const nlohmann::json& manifest);
nlohmann::json read_manifest(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_hex(std::uint64_t h);

// Shortest round-trip decimal form of a double, stable across runs.
std::string format_double(double v);

nlohmann::json scaling_to_json(const data::ScalingInfo& scaling);
data::ScalingInfo scaling_from_json(const nlohmann::json& j);

// Cube persistence: directory with manifest.json + values.bin (+settings.bin).
void save_cube(const std::filesystem::path& dir, const data::TimeSeriesCube& cube);
data::TimeSeriesCube load_cube(const std::filesystem::path& dir);

// Segmented-window persistence: manifest.json + values.bin + conditions.bin
// + parents.bin + starts.bin (+labels.bin when labels are attached).
void save_windows(const std::filesystem::path& dir, const data::SegmentedWindows& windows,
                  const data::ScalingInfo& scaling, const nlohmann::json& extra,
                  const std::vector<double>* labels = nullptr);
data::SegmentedWindows load_windows(const std::filesystem::path& dir, data::ScalingInfo* scaling,
                                    nlohmann::json* manifest_out = nullptr,
                                    std::vector<double>* labels = nullptr);

}  // namespace tsregen::io
