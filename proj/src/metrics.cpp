#include "tsregen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tsregen::metrics {

namespace {

// Neumaier compensated summation; keeps aggregates at brute-force accuracy
// for long error lists.
double stable_sum(const std::vector<double>& xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace

double rmse(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("rmse: empty error list");
  std::vector<double> sq(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) sq[i] = errors[i] * errors[i];
  return std::sqrt(stable_sum(sq) / static_cast<double>(errors.size()));
}

double score_sf(const std::vector<double>& errors) {
  if (errors.empty()) throw std::invalid_argument("score_sf: empty error list");
  std::vector<double> terms(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    double d = errors[i];
    terms[i] = d < 0.0 ? std::expm1(-d / 13.0) : std::expm1(d / 10.0);
  }
  return stable_sum(terms);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("auroc: scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("auroc: empty input");
  std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l > 0 ? 1 : 0;
  std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups, accumulated for the positive class.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] > 0) rank_sum_pos += midrank;
    i = j + 1;
  }
  double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

HistogramSpec error_histogram(const std::vector<double>& errors, double width, bool signed_bins) {
  if (width <= 0.0) throw std::invalid_argument("error_histogram: bin width must be positive");
  HistogramSpec spec;
  spec.width = width;
  spec.signed_bins = signed_bins;
  if (errors.empty()) return spec;

  if (signed_bins) {
    double lo = *std::min_element(errors.begin(), errors.end());
    spec.start = std::floor(lo / width) * width;
  } else {
    spec.start = 0.0;
  }
  std::size_t n_bins = 0;
  for (double e : errors) {
    double v = signed_bins ? e : std::abs(e);
    auto bin = static_cast<std::size_t>(std::floor((v - spec.start) / width));
    n_bins = std::max(n_bins, bin + 1);
  }
  spec.counts.assign(n_bins, 0);
  for (double e : errors) {
    double v = signed_bins ? e : std::abs(e);
    auto bin = static_cast<std::size_t>(std::floor((v - spec.start) / width));
    ++spec.counts[bin];
  }
  return spec;
}

std::vector<double> EvalReport::errors() const {
  std::vector<double> out(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) out[i] = entries[i].error();
  return out;
}

void finalize_report(EvalReport& report, double histogram_width, bool signed_bins) {
  auto errs = report.errors();
  report.rmse = errs.empty() ? 0.0 : rmse(errs);
  report.sf = errs.empty() ? 0.0 : score_sf(errs);
  report.histogram = error_histogram(errs, histogram_width, signed_bins);
}

}  // namespace tsregen::metrics
