#pragma once

#include <filesystem>

#include "tsregen/config.hpp"

namespace tsregen::cli {

// Pipeline stages behind the CLI subcommands. Each reads its manifest
// inputs, writes its artifacts under cfg.out, and prints a one-line summary.
// Errors propagate as exceptions; main() maps them to nonzero exit codes.
void cmd_prepare(const LoadedConfig& cfg);
void cmd_train_gan(const LoadedConfig& cfg);
void cmd_generate(const LoadedConfig& cfg);
void cmd_filter(const LoadedConfig& cfg);
void cmd_train_rul(const LoadedConfig& cfg);
void cmd_evaluate(const LoadedConfig& cfg);
void cmd_predict(const LoadedConfig& cfg, const std::filesystem::path& query_path);
void cmd_bench(const LoadedConfig& cfg);

}  // namespace tsregen::cli
