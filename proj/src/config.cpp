#include "tsregen/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tsregen/rng.hpp"

namespace tsregen::cli {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

class SectionReader {
 public:
  SectionReader(const ConfigText& text, std::string section)
      : section_(std::move(section)) {
    auto it = text.sections.find(section_);
    if (it != text.sections.end()) entries_ = &it->second;
  }

  bool has(const std::string& key) const {
    if (entries_ && entries_->count(key)) {
      seen_.insert(key);
      return true;
    }
    return false;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? entries_->at(key) : fallback;
  }

  double num(const std::string& key, double fallback, double lo, double hi) const {
    if (!has(key)) return fallback;
    const std::string& raw = entries_->at(key);
    std::size_t pos = 0;
    double v;
    try {
      v = std::stod(raw, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument("config [" + section_ + "] " + key + ": not a number: '" + raw + "'");
    }
    if (pos != raw.size())
      throw std::invalid_argument("config [" + section_ + "] " + key + ": not a number: '" + raw + "'");
    if (v < lo || v > hi)
      throw std::invalid_argument("config [" + section_ + "] " + key + ": value " + raw +
                                  " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback, std::size_t lo,
                    std::size_t hi) const {
    double v = num(key, static_cast<double>(fallback), static_cast<double>(lo),
                   static_cast<double>(hi));
    if (v != std::floor(v))
      throw std::invalid_argument("config [" + section_ + "] " + key + ": expected an integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = entries_->at(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("config [" + section_ + "] " + key + ": expected true/false");
  }

  void check_unknown(const ConfigText& text) const {
    auto it = text.sections.find(section_);
    if (it == text.sections.end()) return;
    for (const auto& [key, value] : it->second) {
      (void)value;
      if (!seen_.count(key))
        throw std::invalid_argument("config [" + section_ + "]: unknown key '" + key + "'");
    }
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>* entries_ = nullptr;
  mutable std::set<std::string> seen_;
};

}  // namespace

std::string ConfigText::section_text(const std::string& name) const {
  std::ostringstream os;
  auto it = sections.find(name);
  if (it != sections.end())
    for (const auto& [key, value] : it->second) os << key << '=' << value << '\n';
  return os.str();
}

ConfigText read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  ConfigText text;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config line " + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw std::runtime_error("config line " + std::to_string(lineno) + ": empty section name");
      text.sections[section];
      continue;
    }
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": key outside a section");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    text.sections[section][key] = value;
  }
  return text;
}

RunConfig parse_config(const ConfigText& text) {
  static const std::set<std::string> known_sections = {"run",    "data",     "gan",  "generate",
                                                       "filter", "rul",      "evaluate", "bench"};
  for (const auto& [name, entries] : text.sections) {
    (void)entries;
    if (!known_sections.count(name))
      throw std::invalid_argument("config: unknown section [" + name + "]");
  }

  RunConfig cfg;

  SectionReader run(text, "run");
  std::string pattern = run.str("pattern", "non_cyclic");
  cfg.pattern = data::pattern_from_name(pattern);
  cfg.out = run.str("out", cfg.out.string());
  cfg.seed = static_cast<std::uint64_t>(run.num("seed", 1, 0, 9.007199254740992e15));
  run.check_unknown(text);

  SectionReader d(text, "data");
  cfg.train_path = d.str("train", "");
  cfg.test_path = d.str("test", "");
  cfg.test_rul_path = d.str("test_rul", "");
  cfg.keep = d.count("keep", 0, 0, 1000000);
  cfg.window = d.count("window", cfg.window, 0, 1000000);
  cfg.step = d.count("step", 1, 1, 1000000);
  cfg.rul_cap = d.num("rul_cap", 0.0, 0.0, 1e9);
  cfg.drop_constant = d.flag("drop_constant", true);
  std::string variant = d.str("normalize_variant", "range01");
  if (variant == "printed")
    cfg.normalize_variant = data::ScalingInfo::Variant::printed;
  else if (variant == "range01")
    cfg.normalize_variant = data::ScalingInfo::Variant::range01;
  else
    throw std::invalid_argument("config [data] normalize_variant: expected range01 or printed");
  d.check_unknown(text);

  SectionReader g(text, "gan");
  cfg.gan.noise_channels = g.count("d_z", 8, 1, 1024);
  cfg.gan.batch = g.count("batch", 64, 1, 65536);
  cfg.gan.lr_g = g.num("lr_g", 2e-4, 1e-9, 1.0);
  cfg.gan.lr_d = g.num("lr_d", 2e-4, 1e-9, 1.0);
  cfg.gan.adam_beta1 = g.num("beta1", 0.5, 0.0, 0.999999);
  cfg.gan.adam_beta2 = g.num("beta2", 0.999, 0.0, 0.999999);
  cfg.gan.d_steps = g.count("d_steps", 3, 1, 100);
  cfg.gan.iterations = g.count("iterations", 2000, 1, 10000000);
  cfg.gan.dropout = g.num("dropout", 0.2, 0.0, 0.99);
  cfg.gan.loss = gan::loss_variant_from_name(g.str("loss", "non_saturating"));
  cfg.gan.converge_tol = g.num("converge_tol", 0.05, 0.0, 10.0);
  cfg.gan.converge_window = g.count("converge_window", 50, 1, 100000);
  cfg.gan.conv_filters = g.count("conv_filters", 18, 1, 1024);
  cfg.gan.kernel_width = g.count("kernel", 2, 1, 64);
  cfg.gan.dense_units = g.count("dense_units", 100, 1, 4096);
  cfg.gan.lstm_cells = g.count("lstm_cells", 100, 1, 4096);
  g.check_unknown(text);

  SectionReader gen(text, "generate");
  cfg.generate_count = gen.count("count", 200, 1, 10000000);
  gen.check_unknown(text);

  SectionReader f(text, "filter");
  cfg.filter_threshold = f.num("threshold", 0.5, 0.0, 1.0);
  cfg.filter_clf.conv_filters = f.count("conv_filters", 16, 1, 1024);
  cfg.filter_clf.kernel_width = f.count("kernel", 2, 1, 64);
  cfg.filter_clf.dense_units = f.count("dense_units", 32, 1, 4096);
  cfg.filter_clf.lr = f.num("lr", 1e-3, 1e-9, 1.0);
  cfg.filter_clf.epochs = f.count("epochs", 30, 1, 100000);
  cfg.filter_clf.batch = f.count("batch", 32, 1, 65536);
  cfg.filter_clf.holdout_fraction = f.num("holdout_fraction", 0.2, 0.0, 0.9);
  f.check_unknown(text);

  SectionReader r(text, "rul");
  cfg.rul.lstm_cells = r.count("lstm_cells", 100, 1, 4096);
  cfg.rul.lr = r.num("lr", 1e-3, 1e-9, 1.0);
  cfg.rul.epochs = r.count("epochs", 200, 1, 1000000);
  cfg.rul.batch = r.count("batch", 64, 1, 65536);
  cfg.rul.validation_split = r.num("validation_split", 0.1, 0.0, 0.9);
  r.check_unknown(text);

  SectionReader e(text, "evaluate");
  cfg.eol_fraction = e.num("eol_fraction", 0.7, 0.01, 0.99);
  cfg.rated_capacity = e.num("rated_capacity", 0.0, 0.0, 1e12);
  cfg.histogram_width = e.num("histogram_width", 4.0, 1e-9, 1e9);
  cfg.near_failure_rul = e.num("near_failure_rul", 50.0, 0.0, 1e9);
  e.check_unknown(text);

  SectionReader b(text, "bench");
  cfg.bench_count = b.count("count", 10, 2, 100000);
  cfg.bench_length = b.count("length", 16, 8, 100000);
  cfg.bench_iterations = b.count("iterations", 800, 1, 10000000);
  cfg.bench_generate = b.count("generate", 100, 1, 1000000);
  cfg.bench_batch = b.count("batch", 16, 1, 65536);
  b.check_unknown(text);

  return cfg;
}

std::uint64_t RunConfig::stage_seed(std::string_view stage) const {
  return RngStream::derive(seed, stage);
}

LoadedConfig load_config(const std::filesystem::path& path) {
  LoadedConfig loaded;
  loaded.text = read_config_file(path);
  loaded.run = parse_config(loaded.text);
  return loaded;
}

}  // namespace tsregen::cli
