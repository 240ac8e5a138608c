#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "tsregen/crgan.hpp"
#include "tsregen/cube.hpp"
#include "tsregen/metrics.hpp"
#include "tsregen/ops.hpp"

namespace tsregen::rul {

using ad::Tensor;

// Real and accepted generated windows merged along the cycle direction, with
// per-window labels and origin flags.
struct AugmentedSet {
  std::size_t variables = 0;
  std::size_t window = 0;
  std::vector<std::string> variable_names;
  data::Pattern pattern = data::Pattern::non_cyclic;
  std::vector<double> values;          // count x J x L
  std::vector<double> labels;          // raw RUL (non-cyclic) or normalized capacity (cyclic)
  std::vector<std::uint8_t> generated; // origin flag per window
  std::vector<long long> parents;      // parent unit id, -1 for generated

  std::size_t count() const { return labels.size(); }
  const double* series(std::size_t i) const { return values.data() + i * variables * window; }
};

// Maps a generated window (its values and condition) to a training label.
using LabelAssigner = std::function<double(const double* series, double condition)>;

// Capped-linear rule shared with real windows: a condition y marks the
// window start y*(K-L) inside a reference unit of length K, so the label is
// min(cap, K - y*(K-L) - L + 1).
LabelAssigner make_noncyclic_label_assigner(double cap, std::size_t ref_length,
                                            std::size_t window);

// Cyclic label: mean of the generated capacity channel over the window.
LabelAssigner make_cyclic_label_assigner(std::size_t capacity_index, std::size_t variables,
                                         std::size_t window);

AugmentedSet merge_augmented(const data::SegmentedWindows& real,
                             const std::vector<double>& real_labels,
                             const gan::GeneratedBatch& accepted, const LabelAssigner& assigner);

struct RegressorConfig {
  std::size_t lstm_cells = 100;
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch = 64;
  double validation_split = 0.1;
  // Label normalizer for non-cyclic training; 0 means "use the max label".
  double label_cap = 0.0;
  // For cyclic sets: index of the capacity variable (excluded from the
  // inputs, used as the target).
  std::optional<std::size_t> capacity_index;
  std::uint64_t seed = 1;
};

// LSTM over the input channels followed by a linear unit. Predictions are
// rescaled by label_scale, so non-cyclic models emit raw RUL.
struct RulModel {
  ad::LstmParams lstm;
  Tensor head_w, head_b;
  std::size_t input_variables = 0, window = 0;
  data::Pattern pattern = data::Pattern::non_cyclic;
  double label_scale = 1.0;
  std::optional<std::size_t> capacity_index;
  data::ScalingInfo scaling;  // scaling reference used at fit time

  std::vector<Tensor> parameters() const { return {lstm.wx, lstm.wh, lstm.b, head_w, head_b}; }
};

struct FitLog {
  std::vector<double> train_mse;
  std::vector<double> val_mse;  // empty when the split leaves no holdout
  bool degenerate_labels = false;
};

RulModel make_rul_model(const AugmentedSet& set, const RegressorConfig& cfg,
                        const data::ScalingInfo& scaling, RngStream& rng);

FitLog train_rul(RulModel& model, const AugmentedSet& set, const RegressorConfig& cfg,
                 RngStream& rng);

// Pure function of (model, query). The query window must carry the model's
// input channel count and be normalized with the model's scaling.
double predict(const RulModel& model, const Tensor& window);

// One prediction per test unit from its trailing window; units shorter than
// the window are left-padded by repeating their first sample and flagged.
metrics::EvalReport evaluate_noncyclic(const RulModel& model, const data::TimeSeriesCube& test,
                                       const std::vector<double>& true_rul,
                                       double histogram_width = 4.0);

// Predicted EOL = first cycle whose predicted capacity falls below
// eol_fraction * rated_capacity; entries hold per-cycle capacities so RMSE
// aggregates capacity errors.
metrics::EvalReport evaluate_cyclic(const RulModel& model, const data::TimeSeriesCube& test_cycles,
                                    double eol_fraction, double rated_capacity,
                                    double histogram_width = 4.0);

void save_rul_model(const RulModel& model, const std::filesystem::path& dir, const FitLog* log);
RulModel load_rul_model(const std::filesystem::path& dir);

}  // namespace tsregen::rul
