#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tsregen/crgan.hpp"
#include "tsregen/ops.hpp"
#include "tsregen/rng.hpp"

namespace tsregen::filter {

using ad::Tensor;

struct ClassifierConfig {
  std::size_t conv_filters = 16;
  std::size_t kernel_width = 2;
  std::size_t dense_units = 32;
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 1;
};

// Small convolutional classifier: two conv+pool stages and a dense sigmoid
// head mapping a J x L window to a class-1 probability.
struct RealityClassifier {
  Tensor conv1, conv2;
  Tensor dense_w, dense_b;
  Tensor head_w, head_b;
  std::size_t variables = 0, window = 0;
  double holdout_accuracy = 0.0;
  ClassifierConfig cfg;

  std::vector<Tensor> parameters() const;
};

struct FilterVerdict {
  double probability = 0.0;
  bool accepted = false;
  double threshold = 0.5;
};

struct FilterResult {
  gan::GeneratedBatch accepted;
  gan::GeneratedBatch rejected;
  std::vector<FilterVerdict> verdicts;
};

// Probability that `window` belongs to class 1 (the real class).
double classify(const RealityClassifier& clf, const Tensor& window);

// Supervised train-on-real filter model: positives are the real windows,
// negatives are structured corruptions of them (time-order shuffle, channel
// permutation, amplitude inversion; one corruption drawn per negative).
// Requires at least 10 real windows.
RealityClassifier train_reality_classifier(const std::vector<Tensor>& real_windows,
                                           const ClassifierConfig& cfg, RngStream& rng);

// Shared supervised core over explicit positive/negative sets.
RealityClassifier train_binary_classifier(const std::vector<Tensor>& positives,
                                          const std::vector<Tensor>& negatives,
                                          const ClassifierConfig& cfg, RngStream& rng);

// Partitions the batch by probability >= threshold, preserving input order
// in both partitions.
FilterResult filter_batch(const RealityClassifier& clf, const gan::GeneratedBatch& batch,
                          double threshold);

// Train-on-synthetic / test-on-real protocol: fits a fresh classifier on the
// labeled synthetic windows and returns the AUROC of its scores on the
// labeled real windows. Both sets need both classes.
double tstr_auroc(const std::vector<Tensor>& synthetic, const std::vector<int>& synthetic_labels,
                  const std::vector<Tensor>& real, const std::vector<int>& real_labels,
                  const ClassifierConfig& cfg, RngStream& rng);

void save_classifier(const RealityClassifier& clf, const std::filesystem::path& dir);
RealityClassifier load_classifier(const std::filesystem::path& dir);

// Verdicts CSV: series id, probability, accepted.
void write_verdicts_csv(const std::filesystem::path& path,
                        const std::vector<FilterVerdict>& verdicts);

}  // namespace tsregen::filter
