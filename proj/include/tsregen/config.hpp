#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "tsregen/crgan.hpp"
#include "tsregen/cube.hpp"
#include "tsregen/filter.hpp"
#include "tsregen/rul.hpp"

namespace tsregen::cli {

// Declarative run configuration: flat key=value text with one section per
// stage. A single master seed deterministically derives per-stage seeds.
struct RunConfig {
  data::Pattern pattern = data::Pattern::non_cyclic;
  std::filesystem::path out = "runs/out";
  std::uint64_t seed = 1;

  // [data]
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path test_rul_path;
  std::size_t keep = 0;  // tail truncation; 0 disables
  std::size_t window = 0;
  std::size_t step = 1;
  double rul_cap = 0.0;  // 0 disables the cap
  bool drop_constant = true;
  data::ScalingInfo::Variant normalize_variant = data::ScalingInfo::Variant::range01;

  // [gan]
  gan::GanConfig gan;

  // [generate]
  std::size_t generate_count = 200;

  // [filter]
  double filter_threshold = 0.5;
  filter::ClassifierConfig filter_clf;

  // [rul]
  rul::RegressorConfig rul;

  // [evaluate]
  double eol_fraction = 0.7;
  double rated_capacity = 0.0;  // 0 = largest capacity seen in the test cycles
  double histogram_width = 4.0;
  double near_failure_rul = 50.0;  // binary cut for TSTR labels on RUL windows

  // [bench]
  std::size_t bench_count = 10;
  std::size_t bench_length = 16;
  std::size_t bench_iterations = 800;
  std::size_t bench_generate = 100;
  std::size_t bench_batch = 16;

  std::uint64_t stage_seed(std::string_view stage) const;
};

// Raw parsed sections, kept for content addressing of stage artifacts.
struct ConfigText {
  std::map<std::string, std::map<std::string, std::string>> sections;

  // Canonical "key=value" serialization of one section (sorted keys).
  std::string section_text(const std::string& name) const;
};

RunConfig parse_config(const ConfigText& text);
ConfigText read_config_file(const std::filesystem::path& path);

struct LoadedConfig {
  RunConfig run;
  ConfigText text;
};

LoadedConfig load_config(const std::filesystem::path& path);

}  // namespace tsregen::cli
