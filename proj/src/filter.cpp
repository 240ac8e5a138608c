#include "tsregen/filter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "tsregen/adam.hpp"
#include "tsregen/io.hpp"
#include "tsregen/metrics.hpp"

namespace tsregen::filter {

using ad::Activation;
using ad::GradMode;
using ad::Mode;
using ad::Tape;

namespace {

constexpr std::size_t kPool = 2;

std::size_t stage_out(std::size_t len, std::size_t kernel, const char* stage) {
  if (len < kernel || len - kernel + 1 < kPool)
    throw std::invalid_argument(std::string("classifier: window too short for ") + stage);
  return (len - kernel + 1 - kPool) / kPool + 1;
}

Tensor xavier(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
              RngStream& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (double& v : t.value()) v = rng.uniform(-limit, limit);
  return t;
}

RealityClassifier make_classifier(std::size_t variables, std::size_t window,
                                  const ClassifierConfig& cfg, RngStream& rng) {
  RealityClassifier clf;
  clf.cfg = cfg;
  clf.variables = variables;
  clf.window = window;
  std::size_t f = cfg.conv_filters, kw = cfg.kernel_width;
  std::size_t len1 = stage_out(window, kw, "stage 1");
  std::size_t len2 = stage_out(len1, kw, "stage 2");
  clf.conv1 = xavier({f, variables, kw}, variables * kw, f * kw, rng);
  clf.conv2 = xavier({f, f, kw}, f * kw, f * kw, rng);
  std::size_t flat = f * len2;
  clf.dense_w = xavier({cfg.dense_units, flat}, flat, cfg.dense_units, rng);
  clf.dense_b = Tensor::zeros({cfg.dense_units}, true);
  clf.head_w = xavier({1, cfg.dense_units}, cfg.dense_units, 1, rng);
  clf.head_b = Tensor::zeros({1}, true);
  return clf;
}

Tensor classifier_forward(Tape& tape, const RealityClassifier& clf, const Tensor& window) {
  if (window.rank() != 2 || window.dim(0) != clf.variables || window.dim(1) != clf.window)
    throw std::invalid_argument("classifier: window shape " + ad::shape_to_string(window.shape()) +
                                " does not match [" + std::to_string(clf.variables) + " x " +
                                std::to_string(clf.window) + "]");
  Tensor c1 = ad::conv1d(tape, window, clf.conv1, 1, Activation::relu);
  Tensor p1 = ad::maxpool1d(tape, c1, kPool, kPool);
  Tensor c2 = ad::conv1d(tape, p1, clf.conv2, 1, Activation::relu);
  Tensor p2 = ad::maxpool1d(tape, c2, kPool, kPool);
  Tensor flat = ad::reshape(tape, p2, {p2.size()});
  Tensor hid = ad::dense(tape, flat, clf.dense_w, clf.dense_b, Activation::relu);
  return ad::dense(tape, hid, clf.head_w, clf.head_b, Activation::sigmoid);
}

Tensor corrupt_window(const Tensor& window, RngStream& rng) {
  std::size_t j = window.dim(0), l = window.dim(1);
  Tensor out = Tensor::of(window.shape(), window.value());
  auto& v = out.value();
  // Channel permutation only separates classes with at least two channels.
  std::size_t modes = j >= 2 ? 3 : 2;
  switch (rng.index(modes)) {
    case 0: {  // time-order shuffle (Fisher-Yates), same permutation per channel
      std::vector<std::size_t> perm(l);
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t k = l; k > 1; --k) std::swap(perm[k - 1], perm[rng.index(k)]);
      const auto& src = window.value();
      for (std::size_t c = 0; c < j; ++c)
        for (std::size_t t = 0; t < l; ++t) v[c * l + t] = src[c * l + perm[t]];
      break;
    }
    case 1: {  // amplitude inversion inside the normalized band
      for (double& x : v) x = 1.0 - x;
      break;
    }
    default: {  // channel rotation
      std::size_t shift = 1 + rng.index(j - 1);
      const auto& src = window.value();
      for (std::size_t c = 0; c < j; ++c) {
        std::size_t from = (c + shift) % j;
        for (std::size_t t = 0; t < l; ++t) v[c * l + t] = src[from * l + t];
      }
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<Tensor> RealityClassifier::parameters() const {
  return {conv1, conv2, dense_w, dense_b, head_w, head_b};
}

double classify(const RealityClassifier& clf, const Tensor& window) {
  Tape tape(GradMode::disabled);
  return classifier_forward(tape, clf, window).item();
}

RealityClassifier train_binary_classifier(const std::vector<Tensor>& positives,
                                          const std::vector<Tensor>& negatives,
                                          const ClassifierConfig& cfg, RngStream& rng) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("train_binary_classifier: both classes must be nonempty");
  std::size_t variables = positives.front().dim(0);
  std::size_t window = positives.front().dim(1);
  RealityClassifier clf = make_classifier(variables, window, cfg, rng);

  std::vector<Tensor> all;
  std::vector<double> labels;
  for (const auto& t : positives) {
    all.push_back(t);
    labels.push_back(1.0);
  }
  for (const auto& t : negatives) {
    all.push_back(t);
    labels.push_back(0.0);
  }
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);

  auto holdout = static_cast<std::size_t>(std::floor(cfg.holdout_fraction *
                                                     static_cast<double>(order.size())));
  holdout = std::min(holdout, order.size() - 1);
  std::vector<std::size_t> train_idx(order.begin() + holdout, order.end());
  std::vector<std::size_t> hold_idx(order.begin(), order.begin() + holdout);

  ad::Adam opt(clf.parameters(), {cfg.lr, 0.9, 0.999, 1e-8});
  std::size_t batch = std::max<std::size_t>(1, std::min(cfg.batch, train_idx.size()));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = train_idx.size(); k > 1; --k)
      std::swap(train_idx[k - 1], train_idx[rng.index(k)]);
    for (std::size_t off = 0; off < train_idx.size(); off += batch) {
      std::size_t end = std::min(off + batch, train_idx.size());
      Tape tape;
      std::vector<Tensor> probs;
      std::vector<double> targets;
      for (std::size_t i = off; i < end; ++i) {
        probs.push_back(classifier_forward(tape, clf, all[train_idx[i]]));
        targets.push_back(labels[train_idx[i]]);
      }
      Tensor p = ad::stack_scalars(tape, probs);
      Tensor t = Tensor::of({targets.size()}, targets);
      Tensor loss = ad::scale(tape, ad::bce_terms(tape, p, t), -1.0);
      tape.backward(loss);
      opt.step();
      opt.zero_grad();
    }
  }

  if (!hold_idx.empty()) {
    std::size_t correct = 0;
    for (std::size_t i : hold_idx) {
      double p = classify(clf, all[i]);
      if ((p >= 0.5) == (labels[i] >= 0.5)) ++correct;
    }
    clf.holdout_accuracy = static_cast<double>(correct) / static_cast<double>(hold_idx.size());
  } else {
    clf.holdout_accuracy = 0.5;
  }
  return clf;
}

RealityClassifier train_reality_classifier(const std::vector<Tensor>& real_windows,
                                           const ClassifierConfig& cfg, RngStream& rng) {
  if (real_windows.size() < 10)
    throw std::invalid_argument("train_reality_classifier: need at least 10 real windows, got " +
                                std::to_string(real_windows.size()));
  std::vector<Tensor> negatives;
  negatives.reserve(real_windows.size());
  for (const auto& w : real_windows) negatives.push_back(corrupt_window(w, rng));
  return train_binary_classifier(real_windows, negatives, cfg, rng);
}

FilterResult filter_batch(const RealityClassifier& clf, const gan::GeneratedBatch& batch,
                          double threshold) {
  FilterResult res;
  res.accepted.variables = res.rejected.variables = batch.variables;
  res.accepted.window = res.rejected.window = batch.window;
  res.accepted.seed = res.rejected.seed = batch.seed;
  std::size_t n = batch.variables * batch.window;
  for (std::size_t i = 0; i < batch.count(); ++i) {
    Tensor w = Tensor::of({batch.variables, batch.window},
                          std::vector<double>(batch.series(i), batch.series(i) + n));
    double p = classify(clf, w);
    bool ok = p >= threshold;
    res.verdicts.push_back({p, ok, threshold});
    gan::GeneratedBatch& dst = ok ? res.accepted : res.rejected;
    dst.values.insert(dst.values.end(), batch.series(i), batch.series(i) + n);
    dst.conditions.push_back(batch.conditions[i]);
  }
  return res;
}

double tstr_auroc(const std::vector<Tensor>& synthetic, const std::vector<int>& synthetic_labels,
                  const std::vector<Tensor>& real, const std::vector<int>& real_labels,
                  const ClassifierConfig& cfg, RngStream& rng) {
  if (synthetic.size() != synthetic_labels.size() || real.size() != real_labels.size())
    throw std::invalid_argument("tstr_auroc: windows and labels differ in length");
  auto has_both = [](const std::vector<int>& ls) {
    bool pos = false, neg = false;
    for (int l : ls) (l > 0 ? pos : neg) = true;
    return pos && neg;
  };
  if (synthetic.empty() || real.empty() || !has_both(synthetic_labels) || !has_both(real_labels))
    throw std::invalid_argument("tstr_auroc: both classes must be present in both sets");

  std::vector<Tensor> pos, neg;
  for (std::size_t i = 0; i < synthetic.size(); ++i)
    (synthetic_labels[i] > 0 ? pos : neg).push_back(synthetic[i]);
  ClassifierConfig train_cfg = cfg;
  train_cfg.holdout_fraction = 0.0;  // use every synthetic window for training
  RealityClassifier clf = train_binary_classifier(pos, neg, train_cfg, rng);

  std::vector<double> scores(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) scores[i] = classify(clf, real[i]);
  return metrics::auroc(scores, real_labels);
}

void save_classifier(const RealityClassifier& clf, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["kind"] = "reality_classifier";
  m["variables"] = clf.variables;
  m["window"] = clf.window;
  m["holdout_accuracy"] = clf.holdout_accuracy;
  m["config"] = {{"conv_filters", clf.cfg.conv_filters}, {"kernel_width", clf.cfg.kernel_width},
                 {"dense_units", clf.cfg.dense_units},   {"lr", clf.cfg.lr},
                 {"epochs", clf.cfg.epochs},             {"batch", clf.cfg.batch},
                 {"holdout_fraction", clf.cfg.holdout_fraction}, {"seed", clf.cfg.seed}};
  std::vector<double> flat;
  nlohmann::json shapes = nlohmann::json::array();
  for (const Tensor& p : clf.parameters()) {
    shapes.push_back(p.shape());
    flat.insert(flat.end(), p.value().begin(), p.value().end());
  }
  m["param_shapes"] = shapes;
  io::write_manifest(dir / "manifest.json", m);
  io::write_doubles(dir / "params.bin", flat);
}

RealityClassifier load_classifier(const std::filesystem::path& dir) {
  auto m = io::read_manifest(dir / "manifest.json");
  if (m.value("kind", "") != "reality_classifier")
    throw std::runtime_error(dir.string() + " does not hold a classifier checkpoint");
  ClassifierConfig cfg;
  const auto& jc = m.at("config");
  cfg.conv_filters = jc.at("conv_filters").get<std::size_t>();
  cfg.kernel_width = jc.at("kernel_width").get<std::size_t>();
  cfg.dense_units = jc.at("dense_units").get<std::size_t>();
  cfg.lr = jc.at("lr").get<double>();
  cfg.epochs = jc.at("epochs").get<std::size_t>();
  cfg.batch = jc.at("batch").get<std::size_t>();
  cfg.holdout_fraction = jc.at("holdout_fraction").get<double>();
  cfg.seed = jc.at("seed").get<std::uint64_t>();
  RngStream scratch(0);
  RealityClassifier clf = make_classifier(m.at("variables").get<std::size_t>(),
                                          m.at("window").get<std::size_t>(), cfg, scratch);
  clf.holdout_accuracy = m.at("holdout_accuracy").get<double>();
  auto flat = io::read_doubles(dir / "params.bin");
  std::size_t offset = 0;
  for (Tensor& p : clf.parameters()) {
    if (offset + p.size() > flat.size())
      throw std::runtime_error(dir.string() + ": params.bin shorter than the declared shapes");
    std::copy(flat.begin() + offset, flat.begin() + offset + p.size(), p.value().begin());
    offset += p.size();
  }
  return clf;
}

void write_verdicts_csv(const std::filesystem::path& path,
                        const std::vector<FilterVerdict>& verdicts) {
  std::ostringstream csv;
  csv << "series_id,probability,accepted\n";
  for (std::size_t i = 0; i < verdicts.size(); ++i)
    csv << i << ',' << io::format_double(verdicts[i].probability) << ','
        << (verdicts[i].accepted ? 1 : 0) << '\n';
  io::write_text(path, csv.str());
}

}  // namespace tsregen::filter
