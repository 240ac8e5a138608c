#pragma once

#include <filesystem>

#include "tsregen/metrics.hpp"

namespace tsregen::metrics {

// Writes the report as JSON plus a CSV sidecar (unit_id, actual, predicted,
// error) next to it. Loading and re-emitting reproduces the files byte for
// byte.
void emit_report(const EvalReport& report, const std::filesystem::path& json_path);

EvalReport load_report(const std::filesystem::path& json_path);

}  // namespace tsregen::metrics
