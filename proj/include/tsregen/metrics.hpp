#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace tsregen::metrics {

// sqrt(mean of squared errors). Rejects empty input.
double rmse(const std::vector<double>& errors);

// Asymmetric exponential scoring function: sum of exp(-d/13)-1 for d < 0 and
// exp(d/10)-1 for d >= 0, so late predictions cost more than early ones.
double score_sf(const std::vector<double>& errors);

// Probability a random positive outscores a random negative, ties 0.5
// (the rank-statistic form). Both classes must be present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Contiguous half-open bins [start + i*width, start + (i+1)*width).
struct HistogramSpec {
  double width = 4.0;
  double start = 0.0;
  bool signed_bins = false;  // default bins |error| from 0
  std::vector<std::size_t> counts;
};

HistogramSpec error_histogram(const std::vector<double>& errors, double width,
                              bool signed_bins = false);

struct EvalEntry {
  long long unit = 0;
  double actual = 0.0;
  double predicted = 0.0;
  double error() const { return predicted - actual; }
};

// Per-unit RUL errors plus the aggregate indices; everything recomputable
// from the entries list.
struct EvalReport {
  std::string pattern;
  std::vector<EvalEntry> entries;
  double rmse = 0.0;
  double sf = 0.0;
  std::optional<double> auroc;
  HistogramSpec histogram;
  std::vector<long long> padded_units;  // test units shorter than the window
  // Cyclic end-of-life summary (absent for non-cyclic reports).
  std::optional<long long> predicted_eol;
  std::optional<long long> actual_eol;
  std::optional<long long> rul_error;
  bool censored = false;  // predicted capacity never crossed the threshold

  std::size_t n_test() const { return entries.size(); }
  std::vector<double> errors() const;
};

// Fills rmse / sf / histogram from the entries.
void finalize_report(EvalReport& report, double histogram_width, bool signed_bins = false);

}  // namespace tsregen::metrics
