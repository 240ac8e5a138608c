#include "tsregen/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tsregen/bench.hpp"
#include "tsregen/io.hpp"
#include "tsregen/metrics.hpp"
#include "tsregen/pipeline.hpp"
#include "tsregen/report.hpp"

namespace tsregen::cli {

namespace fs = std::filesystem;
using ad::Tensor;

namespace {

// ---- provenance -----------------------------------------------------------
// Stage artifacts are content-addressed: each manifest carries the hash of
// its config section plus the self-hashes of every (transitive) input, so a
// stage that consumes two artifacts can detect when one went stale.

using InputHashes = std::map<std::string, std::string>;

std::string provenance_self(const std::string& section_text, const InputHashes& inputs) {
  std::string blob = section_text;
  for (const auto& [name, hash] : inputs) blob += "\n" + name + ":" + hash;
  return io::hash_hex(io::fnv1a64(blob));
}

nlohmann::json make_provenance(const std::string& section_text, const InputHashes& inputs) {
  nlohmann::json j;
  j["section"] = io::hash_hex(io::fnv1a64(section_text));
  j["inputs"] = inputs;
  j["self"] = provenance_self(section_text, inputs);
  return j;
}

// The artifact's own name mapped to its self-hash, merged with everything it
// was built from.
InputHashes chain_of(const nlohmann::json& manifest, const std::string& own_name) {
  InputHashes chain;
  if (manifest.contains("provenance")) {
    const auto& prov = manifest.at("provenance");
    chain = prov.at("inputs").get<InputHashes>();
    chain[own_name] = prov.at("self").get<std::string>();
  }
  return chain;
}

void check_chains(const InputHashes& a, const InputHashes& b, const std::string& stage) {
  for (const auto& [name, hash] : a) {
    auto it = b.find(name);
    if (it != b.end() && it->second != hash)
      throw std::runtime_error(stage + ": stale artifact, upstream '" + name +
                               "' changed since a dependent artifact was built");
  }
}

InputHashes merge_chains(std::initializer_list<InputHashes> chains, const std::string& stage) {
  InputHashes merged;
  for (const auto& c : chains) {
    check_chains(merged, c, stage);
    for (const auto& [name, hash] : c) merged[name] = hash;
  }
  return merged;
}

void require_artifact(const fs::path& dir, const std::string& stage) {
  if (!fs::exists(dir / "manifest.json"))
    throw std::runtime_error(stage + ": missing upstream artifact " +
                             (dir / "manifest.json").string());
}

// ---- shared loading --------------------------------------------------------

struct Prepared {
  data::SegmentedWindows windows;
  std::vector<double> labels;
  data::ScalingInfo scaling;
  nlohmann::json manifest;
  InputHashes chain;
};

Prepared load_prepared(const LoadedConfig& cfg, const std::string& stage) {
  fs::path dir = cfg.run.out / "prepared";
  require_artifact(dir, stage);
  Prepared p;
  p.windows = io::load_windows(dir, &p.scaling, &p.manifest, &p.labels);
  p.chain = chain_of(p.manifest, "prepared");
  return p;
}

std::vector<Tensor> window_tensors(const data::SegmentedWindows& w) {
  std::vector<Tensor> out;
  out.reserve(w.count());
  std::size_t n = w.variable_count() * w.window;
  for (std::size_t i = 0; i < w.count(); ++i)
    out.push_back(Tensor::of({w.variable_count(), w.window},
                             std::vector<double>(w.series(i), w.series(i) + n)));
  return out;
}

std::optional<std::size_t> capacity_index_of(const std::vector<std::string>& variables) {
  for (std::size_t j = 0; j < variables.size(); ++j)
    if (variables[j] == "capacity") return j;
  return std::nullopt;
}

rul::LabelAssigner assigner_for(const LoadedConfig& cfg, const Prepared& prepared) {
  if (cfg.run.pattern == data::Pattern::cyclic) {
    auto cap_j = capacity_index_of(prepared.windows.variables);
    if (!cap_j) throw std::runtime_error("prepared cyclic data lacks a 'capacity' variable");
    return rul::make_cyclic_label_assigner(*cap_j, prepared.windows.variable_count(),
                                           prepared.windows.window);
  }
  auto ref_length = prepared.manifest.at("ref_length").get<std::size_t>();
  return rul::make_noncyclic_label_assigner(cfg.run.rul_cap, ref_length, prepared.windows.window);
}

rul::RegressorConfig regressor_config(const LoadedConfig& cfg, const Prepared& prepared,
                                      std::uint64_t seed) {
  rul::RegressorConfig rc = cfg.run.rul;
  rc.seed = seed;
  rc.label_cap = cfg.run.rul_cap;
  if (cfg.run.pattern == data::Pattern::cyclic)
    rc.capacity_index = capacity_index_of(prepared.windows.variables);
  return rc;
}

std::vector<double> read_rul_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open RUL file " + path.string());
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  return out;
}

// ---- stages ----------------------------------------------------------------

struct PreparedBuild {
  data::TimeSeriesCube normalized;
  data::ScalingInfo scaling;
  std::vector<std::string> dropped;
};

PreparedBuild prepare_cube(const LoadedConfig& cfg, const fs::path& path) {
  PreparedBuild b;
  data::TimeSeriesCube cube = cfg.run.pattern == data::Pattern::non_cyclic
                                  ? data::load_noncyclic_table(path)
                                  : data::load_cyclic_cycles(path);
  if (cfg.run.drop_constant) {
    auto [reduced, dropped] = data::drop_constant_variables(cube);
    cube = std::move(reduced);
    b.dropped = std::move(dropped);
  }
  if (cfg.run.keep > 0) cube = data::truncate_tail(cube, cfg.run.keep);
  b.scaling = data::fit_scaling(cube, cfg.run.normalize_variant);
  b.normalized = data::normalize(cube, b.scaling);
  return b;
}

}  // namespace

void cmd_prepare(const LoadedConfig& cfg) {
  if (cfg.run.train_path.empty()) throw std::runtime_error("prepare: [data] train path not set");
  if (!fs::exists(cfg.run.train_path))
    throw std::runtime_error("prepare: data file " + cfg.run.train_path.string() + " does not exist");
  if (cfg.run.window == 0) throw std::runtime_error("prepare: [data] window must be set");

  PreparedBuild build = prepare_cube(cfg, cfg.run.train_path);
  data::SegmentedWindows windows =
      data::segment(build.normalized, {cfg.run.window, cfg.run.step});

  std::vector<double> labels(windows.count());
  if (cfg.run.pattern == data::Pattern::non_cyclic) {
    std::optional<double> cap;
    if (cfg.run.rul_cap > 0.0) cap = cfg.run.rul_cap;
    data::RulLabels unit_labels = data::build_rul_labels(build.normalized, cap);
    std::map<long long, const std::vector<double>*> by_id;
    for (std::size_t i = 0; i < build.normalized.unit_count(); ++i)
      by_id[build.normalized.units[i].id] = &unit_labels.per_unit[i];
    for (std::size_t i = 0; i < windows.count(); ++i) {
      const auto& lv = *by_id.at(windows.parents[i]);
      labels[i] = lv[windows.starts[i] + windows.window - 1];  // RUL at window end
    }
  } else {
    auto cap_j = capacity_index_of(windows.variables);
    if (!cap_j) throw std::runtime_error("prepare: cyclic data lacks a 'capacity' variable");
    for (std::size_t i = 0; i < windows.count(); ++i) {
      const double* cap = windows.series(i) + *cap_j * windows.window;
      double acc = 0.0;
      for (std::size_t k = 0; k < windows.window; ++k) acc += cap[k];
      labels[i] = acc / static_cast<double>(windows.window);
    }
  }

  nlohmann::json extra;
  extra["dropped_variables"] = build.dropped;
  extra["keep"] = cfg.run.keep;
  extra["step"] = cfg.run.step;
  extra["rul_cap"] = cfg.run.rul_cap;
  extra["ref_length"] = build.normalized.max_length();
  extra["condition"] = cfg.run.pattern == data::Pattern::non_cyclic
                           ? "window start / (K - L)"
                           : "cycle number / max cycle number";
  extra["provenance"] = make_provenance(cfg.text.section_text("data"), {});
  io::save_windows(cfg.run.out / "prepared", windows, build.scaling, extra, &labels);

  std::string prepared_self = extra["provenance"]["self"].get<std::string>();

  if (!cfg.run.test_path.empty()) {
    if (!fs::exists(cfg.run.test_path))
      throw std::runtime_error("prepare: data file " + cfg.run.test_path.string() +
                               " does not exist");
    data::TimeSeriesCube test = cfg.run.pattern == data::Pattern::non_cyclic
                                    ? data::load_noncyclic_table(cfg.run.test_path)
                                    : data::load_cyclic_cycles(cfg.run.test_path);
    if (!build.dropped.empty()) {
      // Drop the same variables the training data lost, by name.
      data::TimeSeriesCube reduced;
      reduced.pattern = test.pattern;
      std::vector<std::size_t> kept;
      for (std::size_t j = 0; j < test.variables.size(); ++j) {
        if (std::find(build.dropped.begin(), build.dropped.end(), test.variables[j]) ==
            build.dropped.end()) {
          kept.push_back(j);
          reduced.variables.push_back(test.variables[j]);
        }
      }
      for (const auto& u : test.units) {
        data::UnitSeries nu;
        nu.id = u.id;
        nu.length = u.length;
        nu.settings = u.settings;
        for (std::size_t j : kept)
          nu.values.insert(nu.values.end(), u.values.begin() + j * u.length,
                           u.values.begin() + (j + 1) * u.length);
        reduced.units.push_back(std::move(nu));
      }
      test = std::move(reduced);
    }
    data::TimeSeriesCube test_norm = data::normalize(test, build.scaling, {.clip = true});
    io::save_cube(cfg.run.out / "test_prepared", test_norm);
    // Extend the cube manifest with evaluation inputs and provenance.
    auto m = io::read_manifest(cfg.run.out / "test_prepared" / "manifest.json");
    m["scaling"] = io::scaling_to_json(build.scaling);
    if (cfg.run.pattern == data::Pattern::non_cyclic && !cfg.run.test_rul_path.empty()) {
      if (!fs::exists(cfg.run.test_rul_path))
        throw std::runtime_error("prepare: RUL file " + cfg.run.test_rul_path.string() +
                                 " does not exist");
      m["true_rul"] = read_rul_file(cfg.run.test_rul_path);
    }
    m["provenance"] = make_provenance(cfg.text.section_text("data"), {{"prepared", prepared_self}});
    io::write_manifest(cfg.run.out / "test_prepared" / "manifest.json", m);
  }

  std::ostringstream dropped;
  for (std::size_t i = 0; i < build.dropped.size(); ++i) {
    if (i) dropped << ",";
    dropped << build.dropped[i];
  }
  std::cout << "prepare: " << windows.count() << " x " << windows.variable_count() << " x "
            << windows.window << " windows"
            << (build.dropped.empty() ? "" : " (dropped: " + dropped.str() + ")") << "\n";
}

void cmd_train_gan(const LoadedConfig& cfg) {
  Prepared prepared = load_prepared(cfg, "train-gan");

  gan::GanConfig gc = cfg.run.gan;
  gc.seed = cfg.run.stage_seed("gan");
  RngStream rng(gc.seed);
  gan::CrGanModel model =
      gan::make_model(prepared.windows.variable_count(), prepared.windows.window, gc, rng);
  model.scaling = prepared.scaling;
  gan::TrainLog log = gan::train(model, prepared.windows, rng);

  fs::path dir = cfg.run.out / "gan";
  gan::save_model(model, dir, &log);
  auto m = io::read_manifest(dir / "manifest.json");
  m["provenance"] = make_provenance(cfg.text.section_text("gan"), prepared.chain);
  io::write_manifest(dir / "manifest.json", m);

  std::cout << "train-gan: " << log.v_d.size() << " iterations, final V_D "
            << io::format_double(log.v_d.back()) << (log.converged ? " (converged)" : "") << "\n";
}

void cmd_generate(const LoadedConfig& cfg) {
  fs::path gan_dir = cfg.run.out / "gan";
  require_artifact(gan_dir, "generate");
  gan::CrGanModel model = gan::load_model(gan_dir);
  auto gan_manifest = io::read_manifest(gan_dir / "manifest.json");

  gan::GeneratedBatch batch =
      gan::sample_batch(model, cfg.run.generate_count, cfg.run.stage_seed("generate"));
  fs::path dir = cfg.run.out / "generated";
  gan::save_batch(batch, dir);
  auto m = io::read_manifest(dir / "manifest.json");
  m["provenance"] =
      make_provenance(cfg.text.section_text("generate"), chain_of(gan_manifest, "gan"));
  io::write_manifest(dir / "manifest.json", m);

  std::cout << "generate: " << batch.count() << " series of " << batch.variables << " x "
            << batch.window << "\n";
}

void cmd_filter(const LoadedConfig& cfg) {
  Prepared prepared = load_prepared(cfg, "filter");
  fs::path gen_dir = cfg.run.out / "generated";
  require_artifact(gen_dir, "filter");
  gan::GeneratedBatch batch = gan::load_batch(gen_dir);
  auto gen_manifest = io::read_manifest(gen_dir / "manifest.json");
  InputHashes chain =
      merge_chains({prepared.chain, chain_of(gen_manifest, "generated")}, "filter");

  filter::ClassifierConfig fc = cfg.run.filter_clf;
  fc.seed = cfg.run.stage_seed("filter");
  RngStream rng(fc.seed);
  filter::RealityClassifier clf =
      filter::train_reality_classifier(window_tensors(prepared.windows), fc, rng);
  filter::FilterResult result = filter::filter_batch(clf, batch, cfg.run.filter_threshold);

  fs::path dir = cfg.run.out / "filter";
  fs::create_directories(dir);
  filter::save_classifier(clf, dir / "classifier");
  gan::save_batch(result.accepted, dir / "accepted");
  gan::save_batch(result.rejected, dir / "rejected");
  filter::write_verdicts_csv(dir / "verdicts.csv", result.verdicts);
  nlohmann::json m;
  m["kind"] = "filter";
  m["threshold"] = cfg.run.filter_threshold;
  m["holdout_accuracy"] = clf.holdout_accuracy;
  m["accepted"] = result.accepted.count();
  m["rejected"] = result.rejected.count();
  m["provenance"] = make_provenance(cfg.text.section_text("filter"), chain);
  io::write_manifest(dir / "manifest.json", m);

  std::cout << "filter: accepted " << result.accepted.count() << " / " << batch.count()
            << " (classifier holdout accuracy " << io::format_double(clf.holdout_accuracy)
            << ")\n";
}

void cmd_train_rul(const LoadedConfig& cfg) {
  Prepared prepared = load_prepared(cfg, "train-rul");
  rul::LabelAssigner assigner = assigner_for(cfg, prepared);
  rul::RegressorConfig rc = regressor_config(cfg, prepared, cfg.run.stage_seed("rul"));

  gan::GeneratedBatch empty;
  empty.variables = prepared.windows.variable_count();
  empty.window = prepared.windows.window;
  rul::AugmentedSet baseline =
      rul::merge_augmented(prepared.windows, prepared.labels, empty, assigner);

  RngStream rng_base(rc.seed);
  rul::RulModel base_model = rul::make_rul_model(baseline, rc, prepared.scaling, rng_base);
  rul::FitLog base_log = rul::train_rul(base_model, baseline, rc, rng_base);
  fs::path base_dir = cfg.run.out / "rul_baseline";
  rul::save_rul_model(base_model, base_dir, &base_log);
  {
    auto m = io::read_manifest(base_dir / "manifest.json");
    m["provenance"] = make_provenance(cfg.text.section_text("rul"), prepared.chain);
    if (base_log.degenerate_labels) m["degenerate_labels"] = true;
    io::write_manifest(base_dir / "manifest.json", m);
  }
  std::cout << "train-rul: baseline on " << baseline.count() << " windows, final train MSE "
            << io::format_double(base_log.train_mse.back()) << "\n";

  fs::path accepted_dir = cfg.run.out / "filter" / "accepted";
  if (fs::exists(accepted_dir / "manifest.json")) {
    gan::GeneratedBatch accepted = gan::load_batch(accepted_dir);
    auto filter_manifest = io::read_manifest(cfg.run.out / "filter" / "manifest.json");
    InputHashes chain =
        merge_chains({prepared.chain, chain_of(filter_manifest, "filter")}, "train-rul");
    rul::AugmentedSet augmented =
        rul::merge_augmented(prepared.windows, prepared.labels, accepted, assigner);
    RngStream rng_aug(rc.seed);
    rul::RulModel aug_model = rul::make_rul_model(augmented, rc, prepared.scaling, rng_aug);
    rul::FitLog aug_log = rul::train_rul(aug_model, augmented, rc, rng_aug);
    fs::path aug_dir = cfg.run.out / "rul_augmented";
    rul::save_rul_model(aug_model, aug_dir, &aug_log);
    auto m = io::read_manifest(aug_dir / "manifest.json");
    m["provenance"] = make_provenance(cfg.text.section_text("rul"), chain);
    if (aug_log.degenerate_labels) m["degenerate_labels"] = true;
    io::write_manifest(aug_dir / "manifest.json", m);
    std::cout << "train-rul: augmented on " << augmented.count() << " windows ("
              << accepted.count() << " generated), final train MSE "
              << io::format_double(aug_log.train_mse.back()) << "\n";
  }
}

namespace {

metrics::EvalReport evaluate_model(const LoadedConfig& cfg, const rul::RulModel& model,
                                   const data::TimeSeriesCube& test,
                                   const nlohmann::json& test_manifest) {
  if (cfg.run.pattern == data::Pattern::non_cyclic) {
    if (!test_manifest.contains("true_rul"))
      throw std::runtime_error("evaluate: test artifact lacks true RUL values (set [data] test_rul)");
    auto true_rul = test_manifest.at("true_rul").get<std::vector<double>>();
    return rul::evaluate_noncyclic(model, test, true_rul, cfg.run.histogram_width);
  }
  double rated = cfg.run.rated_capacity;
  auto cap_j = capacity_index_of(test.variables);
  if (!cap_j) throw std::runtime_error("evaluate: cyclic test data lacks a 'capacity' variable");
  if (rated <= 0.0) {
    // Largest denormalized capacity across the test cycles.
    double hi = -1e300;
    const auto& sc = model.scaling;
    for (const auto& u : test.units)
      for (std::size_t k = 0; k < u.length; ++k) {
        double v = u.at(*cap_j, k);
        double raw = sc.variant == data::ScalingInfo::Variant::printed
                         ? v * sc.vmax[*cap_j] + sc.vmin[*cap_j]
                         : v * (sc.vmax[*cap_j] - sc.vmin[*cap_j]) + sc.vmin[*cap_j];
        hi = std::max(hi, raw);
      }
    rated = hi;
  }
  return rul::evaluate_cyclic(model, test, cfg.run.eol_fraction, rated, cfg.run.histogram_width);
}

}  // namespace

void cmd_evaluate(const LoadedConfig& cfg) {
  fs::path test_dir = cfg.run.out / "test_prepared";
  require_artifact(test_dir, "evaluate");
  data::TimeSeriesCube test = io::load_cube(test_dir);
  auto test_manifest = io::read_manifest(test_dir / "manifest.json");
  InputHashes test_chain = chain_of(test_manifest, "test_prepared");

  struct Variant {
    const char* name;
    fs::path dir;
  };
  std::vector<Variant> variants;
  fs::path base_dir = cfg.run.out / "rul_baseline";
  fs::path aug_dir = cfg.run.out / "rul_augmented";
  if (fs::exists(base_dir / "manifest.json")) variants.push_back({"baseline", base_dir});
  if (fs::exists(aug_dir / "manifest.json")) variants.push_back({"augmented", aug_dir});
  if (variants.empty())
    throw std::runtime_error("evaluate: missing upstream artifact " +
                             (base_dir / "manifest.json").string());

  fs::create_directories(cfg.run.out / "evaluate");
  for (const auto& v : variants) {
    rul::RulModel model = rul::load_rul_model(v.dir);
    auto model_manifest = io::read_manifest(v.dir / "manifest.json");
    check_chains(chain_of(model_manifest, v.name), test_chain, "evaluate");
    metrics::EvalReport report = evaluate_model(cfg, model, test, test_manifest);
    metrics::emit_report(report, cfg.run.out / "evaluate" / (std::string("report_") + v.name + ".json"));
    std::cout << "evaluate[" << v.name << "]: n=" << report.n_test()
              << " rmse=" << io::format_double(report.rmse)
              << " sf=" << io::format_double(report.sf);
    if (report.rul_error) std::cout << " rul_error=" << *report.rul_error;
    if (report.censored) std::cout << " censored";
    std::cout << "\n";
  }
}

void cmd_predict(const LoadedConfig& cfg, const std::filesystem::path& query_path) {
  fs::path aug_dir = cfg.run.out / "rul_augmented";
  fs::path base_dir = cfg.run.out / "rul_baseline";
  fs::path model_dir = fs::exists(aug_dir / "manifest.json") ? aug_dir : base_dir;
  require_artifact(model_dir, "predict");
  rul::RulModel model = rul::load_rul_model(model_dir);

  if (!fs::exists(query_path))
    throw std::runtime_error("predict: query file " + query_path.string() + " does not exist");
  std::ifstream in(query_path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    if (row.empty()) continue;
    if (row.size() != model.input_variables)
      throw std::runtime_error("predict: query row has " + std::to_string(row.size()) +
                               " variables, model expects " +
                               std::to_string(model.input_variables));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("predict: query file holds no samples");

  // Raw-scale query -> model scaling -> trailing window (front-padded).
  std::size_t j_in = model.input_variables;
  std::size_t window = model.window;
  data::ScalingInfo input_scaling = model.scaling;
  if (model.capacity_index) {
    input_scaling.vmin.erase(input_scaling.vmin.begin() +
                             static_cast<std::ptrdiff_t>(*model.capacity_index));
    input_scaling.vmax.erase(input_scaling.vmax.begin() +
                             static_cast<std::ptrdiff_t>(*model.capacity_index));
  }
  std::vector<double> series(j_in * window);
  for (std::size_t t = 0; t < window; ++t) {
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(rows.size()) -
                       static_cast<std::ptrdiff_t>(window) + static_cast<std::ptrdiff_t>(t);
    if (k < 0) k = 0;
    for (std::size_t j = 0; j < j_in; ++j)
      series[j * window + t] = rows[static_cast<std::size_t>(k)][j];
  }
  data::normalize_series(series.data(), j_in, window, input_scaling, {.clip = true});
  double value = rul::predict(model, Tensor::of({j_in, window}, std::move(series)));
  if (model.pattern == data::Pattern::cyclic) {
    // Model emits normalized capacity; report it in raw units.
    std::size_t cap_j = *model.capacity_index;
    const auto& sc = model.scaling;
    double raw = sc.variant == data::ScalingInfo::Variant::printed
                     ? value * sc.vmax[cap_j] + sc.vmin[cap_j]
                     : value * (sc.vmax[cap_j] - sc.vmin[cap_j]) + sc.vmin[cap_j];
    std::cout << "predict: capacity " << io::format_double(raw) << "\n";
  } else {
    std::cout << "predict: RUL " << io::format_double(value) << "\n";
  }
}

void cmd_bench(const LoadedConfig& cfg) {
  std::uint64_t seed = cfg.run.stage_seed("bench");
  fs::path out = cfg.run.out;
  fs::create_directories(out);

  gan::GanConfig gc = cfg.run.gan;
  gc.iterations = cfg.run.bench_iterations;
  gc.batch = cfg.run.bench_batch;

  nlohmann::json report;
  struct BenchCase {
    std::string name;
    data::TimeSeriesCube cube;
  };
  data::SinusoidSpec sin_spec;
  sin_spec.count = cfg.run.bench_count;
  sin_spec.length = cfg.run.bench_length;
  std::vector<BenchCase> cases;
  cases.push_back({"sinusoid", data::make_sinusoid_bench(sin_spec, RngStream::derive(seed, "sin"))});
  cases.push_back({"smooth", data::make_smooth_bench(cfg.run.bench_count, cfg.run.bench_length,
                                                     RngStream::derive(seed, "smooth"))});

  std::ostringstream fits_csv;
  fits_csv << "bench,series,amplitude,freq,phase,r2,nearest_real\n";

  for (auto& bc : cases) {
    data::ScalingInfo scaling = data::fit_scaling(bc.cube);
    data::TimeSeriesCube norm = data::normalize(bc.cube, scaling);
    data::SegmentedWindows windows = data::segment(norm, {cfg.run.bench_length, 1});
    io::save_cube(out / ("bench_" + bc.name + "_data"), bc.cube);

    gc.seed = RngStream::derive(seed, bc.name);
    RngStream rng(gc.seed);
    gan::CrGanModel model = gan::make_model(1, cfg.run.bench_length, gc, rng);
    model.scaling = scaling;
    gan::TrainLog log = gan::train(model, windows, rng);
    gan::save_model(model, out / ("bench_" + bc.name + "_gan"), &log);

    gan::GeneratedBatch batch =
        gan::sample_batch(model, cfg.run.bench_generate, RngStream::derive(gc.seed, "sample"));

    std::size_t fit_ok = 0, in_range = 0;
    double near_sum = 0.0, near_min = 1e300, near_max = 0.0;
    nlohmann::json fits = nlohmann::json::array();
    for (std::size_t i = 0; i < batch.count(); ++i) {
      std::vector<double> series(batch.series(i), batch.series(i) + batch.window);
      // Nearest real window, RMS distance in normalized space.
      double best = 1e300;
      for (std::size_t r = 0; r < windows.count(); ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < batch.window; ++k) {
          double d = series[k] - windows.series(r)[k];
          acc += d * d;
        }
        best = std::min(best, std::sqrt(acc / static_cast<double>(batch.window)));
      }
      near_sum += best;
      near_min = std::min(near_min, best);
      near_max = std::max(near_max, best);

      data::denormalize_series(series.data(), 1, batch.window, scaling);
      data::SinusoidFit fit = data::fit_sinusoid(series.data(), batch.window);
      if (bc.name == "sinusoid") {
        if (fit.r2 >= 0.8) ++fit_ok;
        if (fit.r2 >= 0.8 && fit.amplitude >= sin_spec.amp_lo && fit.amplitude <= sin_spec.amp_hi &&
            fit.freq >= sin_spec.freq_lo && fit.freq <= sin_spec.freq_hi)
          ++in_range;
        fits.push_back({{"series", i},
                        {"amplitude", fit.amplitude},
                        {"freq", fit.freq},
                        {"phase", fit.phase},
                        {"r2", fit.r2}});
      }
      fits_csv << bc.name << ',' << i << ',' << io::format_double(fit.amplitude) << ','
               << io::format_double(fit.freq) << ',' << io::format_double(fit.phase) << ','
               << io::format_double(fit.r2) << ',' << io::format_double(best) << '\n';
    }

    nlohmann::json jc;
    jc["iterations"] = log.v_d.size();
    jc["converged"] = log.converged;
    jc["generated"] = batch.count();
    jc["nearest_real"] = {{"mean", near_sum / static_cast<double>(batch.count())},
                          {"min", near_min},
                          {"max", near_max}};
    if (bc.name == "sinusoid") {
      jc["fits"] = fits;
      jc["fit_r2_ge_0.8"] = static_cast<double>(fit_ok) / static_cast<double>(batch.count());
      jc["fit_in_range"] = static_cast<double>(in_range) / static_cast<double>(batch.count());
    }
    report[bc.name] = jc;
  }

  io::write_manifest(out / "regen_report.json", report);
  io::write_text(out / "bench_fits.csv", fits_csv.str());
  std::cout << "bench: sinusoid fit_in_range "
            << io::format_double(report["sinusoid"]["fit_in_range"].get<double>())
            << ", reports in " << (out / "regen_report.json").string() << "\n";
}

}  // namespace tsregen::cli
