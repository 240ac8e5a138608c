#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsregen/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tsregen: run-to-failure time-series regeneration and RUL estimation"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "run configuration file")->required();
  long long seed_override = -1;
  app.add_option("--seed", seed_override, "override the master seed");
  std::string out_override;
  app.add_option("--out", out_override, "override the output directory");

  auto* prepare = app.add_subcommand("prepare", "load, clean, normalize, and segment the data");
  auto* train_gan = app.add_subcommand("train-gan", "train the CR-GAN on prepared windows");
  auto* generate = app.add_subcommand("generate", "sample synthetic series from the CR-GAN");
  auto* filter = app.add_subcommand("filter", "reject irrational generated series");
  auto* train_rul = app.add_subcommand("train-rul", "train baseline and augmented RUL models");
  auto* evaluate = app.add_subcommand("evaluate", "score RUL models on the test data");
  auto* predict = app.add_subcommand("predict", "estimate RUL for one query series");
  std::string query_path;
  predict->add_option("query", query_path, "query series file")->required();
  auto* bench = app.add_subcommand("bench", "synthetic benchmark generation and quality report");

  CLI11_PARSE(app, argc, argv);

  std::string stage = app.get_subcommands().front()->get_name();
  try {
    tsregen::cli::LoadedConfig cfg = tsregen::cli::load_config(config_path);
    if (seed_override >= 0) cfg.run.seed = static_cast<std::uint64_t>(seed_override);
    if (!out_override.empty()) cfg.run.out = out_override;

    if (prepare->parsed()) tsregen::cli::cmd_prepare(cfg);
    if (train_gan->parsed()) tsregen::cli::cmd_train_gan(cfg);
    if (generate->parsed()) tsregen::cli::cmd_generate(cfg);
    if (filter->parsed()) tsregen::cli::cmd_filter(cfg);
    if (train_rul->parsed()) tsregen::cli::cmd_train_rul(cfg);
    if (evaluate->parsed()) tsregen::cli::cmd_evaluate(cfg);
    if (predict->parsed()) tsregen::cli::cmd_predict(cfg, query_path);
    if (bench->parsed()) tsregen::cli::cmd_bench(cfg);
  } catch (const std::exception& e) {
    std::cerr << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
