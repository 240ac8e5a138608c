#include "tsregen/rul.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tsregen/adam.hpp"
#include "tsregen/io.hpp"
#include "tsregen/pipeline.hpp"

namespace tsregen::rul {

using ad::Activation;
using ad::GradMode;
using ad::Mode;
using ad::Tape;

LabelAssigner make_noncyclic_label_assigner(double cap, std::size_t ref_length,
                                            std::size_t window) {
  if (ref_length < window)
    throw std::invalid_argument("label assigner: reference length shorter than the window");
  double k = static_cast<double>(ref_length);
  double l = static_cast<double>(window);
  return [cap, k, l](const double*, double condition) {
    double start = condition * (k - l);
    double label = k - start - l + 1.0;
    return cap > 0.0 ? std::min(cap, label) : label;
  };
}

LabelAssigner make_cyclic_label_assigner(std::size_t capacity_index, std::size_t variables,
                                         std::size_t window) {
  if (capacity_index >= variables)
    throw std::invalid_argument("label assigner: capacity index out of range");
  return [capacity_index, window](const double* series, double) {
    const double* cap = series + capacity_index * window;
    double acc = 0.0;
    for (std::size_t k = 0; k < window; ++k) acc += cap[k];
    return acc / static_cast<double>(window);
  };
}

AugmentedSet merge_augmented(const data::SegmentedWindows& real,
                             const std::vector<double>& real_labels,
                             const gan::GeneratedBatch& accepted, const LabelAssigner& assigner) {
  if (real_labels.size() != real.count())
    throw std::invalid_argument("merge_augmented: label count does not match window count");
  if (accepted.count() > 0 &&
      (accepted.variables != real.variable_count() || accepted.window != real.window))
    throw std::invalid_argument(
        "merge_augmented: generated windows are " + std::to_string(accepted.variables) + " x " +
        std::to_string(accepted.window) + " but real windows are " +
        std::to_string(real.variable_count()) + " x " + std::to_string(real.window));

  AugmentedSet set;
  set.variables = real.variable_count();
  set.window = real.window;
  set.variable_names = real.variables;
  set.pattern = real.pattern;
  set.values = real.values;
  set.labels = real_labels;
  set.generated.assign(real.count(), 0);
  set.parents = real.parents;

  std::size_t n = set.variables * set.window;
  for (std::size_t i = 0; i < accepted.count(); ++i) {
    const double* src = accepted.series(i);
    set.values.insert(set.values.end(), src, src + n);
    set.labels.push_back(assigner(src, accepted.conditions[i]));
    set.generated.push_back(1);
    set.parents.push_back(-1);
  }
  return set;
}

namespace {

// Input channels of a window: all variables, minus the capacity channel for
// cyclic models.
Tensor input_window(const double* series, std::size_t variables, std::size_t window,
                    const std::optional<std::size_t>& capacity_index) {
  if (!capacity_index) {
    return Tensor::of({variables, window},
                      std::vector<double>(series, series + variables * window));
  }
  std::vector<double> vals;
  vals.reserve((variables - 1) * window);
  for (std::size_t j = 0; j < variables; ++j) {
    if (j == *capacity_index) continue;
    vals.insert(vals.end(), series + j * window, series + (j + 1) * window);
  }
  return Tensor::of({variables - 1, window}, std::move(vals));
}

Tensor model_forward(Tape& tape, const RulModel& model, const Tensor& window) {
  if (window.rank() != 2 || window.dim(0) != model.input_variables ||
      window.dim(1) != model.window)
    throw std::invalid_argument("rul predict: query has " + std::to_string(window.dim(0)) +
                                " variables over " + std::to_string(window.dim(1)) +
                                " steps, model expects " + std::to_string(model.input_variables) +
                                " x " + std::to_string(model.window));
  Tensor h0 = Tensor::zeros({model.lstm.hidden_size()});
  Tensor c0 = Tensor::zeros({model.lstm.hidden_size()});
  Tensor hidden = ad::lstm(tape, window, model.lstm, h0, c0);
  Tensor last = ad::column(tape, hidden, model.window - 1);
  return ad::dense(tape, last, model.head_w, model.head_b, Activation::none);
}

// Trailing window of one unit, left-padded by repeating the first sample
// when the unit is shorter than the window.
std::pair<Tensor, bool> trailing_window(const data::UnitSeries& unit, std::size_t variables,
                                        std::size_t window,
                                        const std::optional<std::size_t>& capacity_index) {
  std::vector<double> vals(variables * window);
  bool padded = unit.length < window;
  for (std::size_t j = 0; j < variables; ++j) {
    for (std::size_t t = 0; t < window; ++t) {
      std::ptrdiff_t k = static_cast<std::ptrdiff_t>(unit.length) -
                         static_cast<std::ptrdiff_t>(window) + static_cast<std::ptrdiff_t>(t);
      if (k < 0) k = 0;
      vals[j * window + t] = unit.values[j * unit.length + static_cast<std::size_t>(k)];
    }
  }
  return {input_window(vals.data(), variables, window, capacity_index), padded};
}

}  // namespace

RulModel make_rul_model(const AugmentedSet& set, const RegressorConfig& cfg,
                        const data::ScalingInfo& scaling, RngStream& rng) {
  RulModel model;
  model.pattern = set.pattern;
  model.window = set.window;
  model.capacity_index = set.pattern == data::Pattern::cyclic ? cfg.capacity_index : std::nullopt;
  if (set.pattern == data::Pattern::cyclic && !model.capacity_index)
    throw std::invalid_argument("rul: cyclic training needs the capacity variable index");
  model.input_variables = set.variables - (model.capacity_index ? 1 : 0);
  model.scaling = scaling;
  if (set.pattern == data::Pattern::non_cyclic) {
    double scale = cfg.label_cap;
    if (scale <= 0.0) scale = *std::max_element(set.labels.begin(), set.labels.end());
    model.label_scale = scale > 0.0 ? scale : 1.0;
  } else {
    model.label_scale = 1.0;
  }
  model.lstm = ad::LstmParams::init(model.input_variables, cfg.lstm_cells, rng);
  double limit = std::sqrt(6.0 / static_cast<double>(cfg.lstm_cells + 1));
  model.head_w = Tensor::zeros({1, cfg.lstm_cells}, true);
  for (double& v : model.head_w.value()) v = rng.uniform(-limit, limit);
  model.head_b = Tensor::zeros({1}, true);
  return model;
}

FitLog train_rul(RulModel& model, const AugmentedSet& set, const RegressorConfig& cfg,
                 RngStream& rng) {
  if (set.count() == 0) throw std::invalid_argument("train_rul: empty training set");

  FitLog log;
  double lo = *std::min_element(set.labels.begin(), set.labels.end());
  double hi = *std::max_element(set.labels.begin(), set.labels.end());
  log.degenerate_labels = lo == hi;

  std::vector<double> targets(set.count());
  for (std::size_t i = 0; i < set.count(); ++i) targets[i] = set.labels[i] / model.label_scale;

  std::vector<std::size_t> order(set.count());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
  auto val_count = static_cast<std::size_t>(std::floor(cfg.validation_split *
                                                       static_cast<double>(order.size())));
  val_count = std::min(val_count, order.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + val_count);
  std::vector<std::size_t> train_idx(order.begin() + val_count, order.end());

  auto window_at = [&](std::size_t i) {
    return input_window(set.series(i), set.variables, set.window, model.capacity_index);
  };

  ad::Adam opt(model.parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
  std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch, train_idx.size()));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = train_idx.size(); k > 1; --k)
      std::swap(train_idx[k - 1], train_idx[rng.index(k)]);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t off = 0; off < train_idx.size(); off += batch) {
      std::size_t end = std::min(off + batch, train_idx.size());
      Tape tape;
      std::vector<Tensor> sq_errors;
      for (std::size_t i = off; i < end; ++i) {
        std::size_t idx = train_idx[i];
        Tensor pred = model_forward(tape, model, window_at(idx));
        Tensor diff = ad::sub(tape, pred, Tensor::scalar(targets[idx]));
        sq_errors.push_back(ad::mul(tape, diff, diff));
      }
      Tensor loss = ad::mean(tape, ad::stack_scalars(tape, sq_errors));
      epoch_loss += loss.item() * static_cast<double>(end - off);
      seen += end - off;
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
    log.train_mse.push_back(epoch_loss / static_cast<double>(seen));
    if (!val_idx.empty()) {
      double val_loss = 0.0;
      for (std::size_t idx : val_idx) {
        Tape tape(GradMode::disabled);
        double pred = model_forward(tape, model, window_at(idx)).item();
        double d = pred - targets[idx];
        val_loss += d * d;
      }
      log.val_mse.push_back(val_loss / static_cast<double>(val_idx.size()));
    }
  }
  return log;
}

double predict(const RulModel& model, const Tensor& window) {
  Tape tape(GradMode::disabled);
  return model_forward(tape, model, window).item() * model.label_scale;
}

metrics::EvalReport evaluate_noncyclic(const RulModel& model, const data::TimeSeriesCube& test,
                                       const std::vector<double>& true_rul,
                                       double histogram_width) {
  if (model.pattern != data::Pattern::non_cyclic)
    throw std::invalid_argument("evaluate_noncyclic: model was trained on cyclic data");
  if (test.unit_count() != true_rul.size())
    throw std::invalid_argument("evaluate_noncyclic: " + std::to_string(test.unit_count()) +
                                " test units but " + std::to_string(true_rul.size()) +
                                " true RUL values");
  if (test.variable_count() != model.input_variables)
    throw std::invalid_argument("evaluate_noncyclic: test cube has " +
                                std::to_string(test.variable_count()) +
                                " variables, model expects " +
                                std::to_string(model.input_variables));
  metrics::EvalReport report;
  report.pattern = data::pattern_name(data::Pattern::non_cyclic);
  for (std::size_t i = 0; i < test.unit_count(); ++i) {
    auto [window, padded] = trailing_window(test.units[i], test.variable_count(), model.window,
                                            std::nullopt);
    if (padded) report.padded_units.push_back(test.units[i].id);
    metrics::EvalEntry e;
    e.unit = test.units[i].id;
    e.actual = true_rul[i];
    e.predicted = predict(model, window);
    report.entries.push_back(e);
  }
  metrics::finalize_report(report, histogram_width);
  return report;
}

metrics::EvalReport evaluate_cyclic(const RulModel& model, const data::TimeSeriesCube& test_cycles,
                                    double eol_fraction, double rated_capacity,
                                    double histogram_width) {
  if (model.pattern != data::Pattern::cyclic)
    throw std::invalid_argument("evaluate_cyclic: model was trained on non-cyclic data");
  if (!(eol_fraction > 0.0 && eol_fraction < 1.0))
    throw std::invalid_argument("evaluate_cyclic: eol_fraction must lie in (0, 1)");
  if (rated_capacity <= 0.0)
    throw std::invalid_argument("evaluate_cyclic: rated capacity must be positive");
  if (!model.capacity_index)
    throw std::invalid_argument("evaluate_cyclic: model lacks a capacity variable index");

  std::size_t cap_j = *model.capacity_index;
  double cap_lo = model.scaling.vmin.at(cap_j);
  double cap_hi = model.scaling.vmax.at(cap_j);
  auto denorm_cap = [&](double v) {
    return model.scaling.variant == data::ScalingInfo::Variant::printed
               ? v * cap_hi + cap_lo
               : (cap_hi > cap_lo ? v * (cap_hi - cap_lo) + cap_lo : cap_lo);
  };

  double threshold = eol_fraction * rated_capacity;
  metrics::EvalReport report;
  report.pattern = data::pattern_name(data::Pattern::cyclic);
  std::optional<long long> predicted_eol, actual_eol;
  for (const auto& cycle : test_cycles.units) {
    auto [window, padded] =
        trailing_window(cycle, test_cycles.variable_count(), model.window, model.capacity_index);
    if (padded) report.padded_units.push_back(cycle.id);
    double pred_cap = denorm_cap(predict(model, window));
    double true_norm = 0.0;
    for (std::size_t k = 0; k < cycle.length; ++k) true_norm += cycle.at(cap_j, k);
    double true_cap = denorm_cap(true_norm / static_cast<double>(cycle.length));

    metrics::EvalEntry e;
    e.unit = cycle.id;
    e.actual = true_cap;
    e.predicted = pred_cap;
    report.entries.push_back(e);

    if (!predicted_eol && pred_cap < threshold) predicted_eol = cycle.id;
    if (!actual_eol && true_cap < threshold) actual_eol = cycle.id;
  }
  report.predicted_eol = predicted_eol;
  report.actual_eol = actual_eol;
  if (predicted_eol && actual_eol) {
    report.rul_error = *predicted_eol - *actual_eol;
  } else {
    report.censored = true;
  }
  metrics::finalize_report(report, histogram_width);
  return report;
}

void save_rul_model(const RulModel& model, const std::filesystem::path& dir, const FitLog* log) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["kind"] = "rul_model";
  m["pattern"] = data::pattern_name(model.pattern);
  m["input_variables"] = model.input_variables;
  m["window"] = model.window;
  m["lstm_cells"] = model.lstm.hidden_size();
  m["label_scale"] = model.label_scale;
  if (model.capacity_index) m["capacity_index"] = *model.capacity_index;
  m["scaling"] = io::scaling_to_json(model.scaling);
  std::vector<double> flat;
  nlohmann::json shapes = nlohmann::json::array();
  for (const Tensor& p : model.parameters()) {
    shapes.push_back(p.shape());
    flat.insert(flat.end(), p.value().begin(), p.value().end());
  }
  m["param_shapes"] = shapes;
  io::write_manifest(dir / "manifest.json", m);
  io::write_doubles(dir / "params.bin", flat);
  if (log) {
    std::ostringstream csv;
    csv << "epoch,train_mse,val_mse\n";
    for (std::size_t i = 0; i < log->train_mse.size(); ++i) {
      csv << i << ',' << io::format_double(log->train_mse[i]) << ',';
      if (i < log->val_mse.size()) csv << io::format_double(log->val_mse[i]);
      csv << '\n';
    }
    io::write_text(dir / "loss_history.csv", csv.str());
  }
}

RulModel load_rul_model(const std::filesystem::path& dir) {
  auto m = io::read_manifest(dir / "manifest.json");
  if (m.value("kind", "") != "rul_model")
    throw std::runtime_error(dir.string() + " does not hold a RUL model checkpoint");
  RulModel model;
  model.pattern = data::pattern_from_name(m.at("pattern").get<std::string>());
  model.input_variables = m.at("input_variables").get<std::size_t>();
  model.window = m.at("window").get<std::size_t>();
  model.label_scale = m.at("label_scale").get<double>();
  if (m.contains("capacity_index")) model.capacity_index = m.at("capacity_index").get<std::size_t>();
  model.scaling = io::scaling_from_json(m.at("scaling"));
  auto cells = m.at("lstm_cells").get<std::size_t>();
  RngStream scratch(0);
  model.lstm = ad::LstmParams::init(model.input_variables, cells, scratch);
  model.head_w = Tensor::zeros({1, cells}, true);
  model.head_b = Tensor::zeros({1}, true);
  auto flat = io::read_doubles(dir / "params.bin");
  std::size_t offset = 0;
  for (Tensor& p : model.parameters()) {
    if (offset + p.size() > flat.size())
      throw std::runtime_error(dir.string() + ": params.bin shorter than the declared shapes");
    std::copy(flat.begin() + offset, flat.begin() + offset + p.size(), p.value().begin());
    offset += p.size();
  }
  return model;
}

}  // namespace tsregen::rul
