#include "tsregen/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace tsregen::data {

namespace {

constexpr std::size_t kSettingColumns = 3;
constexpr std::size_t kSensorColumns = 21;
constexpr std::size_t kEngineColumns = 2 + kSettingColumns + kSensorColumns;

double parse_field(const std::string& field, std::size_t row) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(field, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("row " + std::to_string(row) + ": non-numeric field '" + field + "'");
  }
  if (pos != field.size())
    throw std::runtime_error("row " + std::to_string(row) + ": non-numeric field '" + field + "'");
  if (!std::isfinite(v))
    throw std::runtime_error("row " + std::to_string(row) + ": non-finite value '" + field + "'");
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_delim(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(line);
  while (std::getline(is, tok, delim)) out.push_back(tok);
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::string pattern_name(Pattern p) { return p == Pattern::non_cyclic ? "non_cyclic" : "cyclic"; }

Pattern pattern_from_name(const std::string& name) {
  if (name == "non_cyclic") return Pattern::non_cyclic;
  if (name == "cyclic") return Pattern::cyclic;
  throw std::invalid_argument("unknown pattern '" + name + "'");
}

std::size_t TimeSeriesCube::min_length() const {
  std::size_t m = std::numeric_limits<std::size_t>::max();
  for (const auto& u : units) m = std::min(m, u.length);
  return units.empty() ? 0 : m;
}

std::size_t TimeSeriesCube::max_length() const {
  std::size_t m = 0;
  for (const auto& u : units) m = std::max(m, u.length);
  return m;
}

TimeSeriesCube load_noncyclic_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file " + path.string());

  // Rows arrive grouped per unit; collect column-major per unit then pack.
  struct Raw {
    std::vector<double> sensors;   // row-major rows x 21
    std::vector<double> settings;  // row-major rows x 3
    long long last_time = 0;
    std::size_t rows = 0;
  };
  std::vector<long long> order;
  std::map<long long, Raw> raws;

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    auto fields = split_ws(line);
    if (fields.size() != kEngineColumns) {
      throw std::runtime_error("row " + std::to_string(row) + ": expected " +
                               std::to_string(kEngineColumns) + " columns, got " +
                               std::to_string(fields.size()));
    }
    long long unit = static_cast<long long>(parse_field(fields[0], row));
    long long time = static_cast<long long>(parse_field(fields[1], row));
    auto it = raws.find(unit);
    if (it == raws.end()) {
      order.push_back(unit);
      it = raws.emplace(unit, Raw{}).first;
      if (time != 1)
        throw std::runtime_error("row " + std::to_string(row) + ": unit " + std::to_string(unit) +
                                 " starts at time " + std::to_string(time) + ", expected 1");
    } else if (time != it->second.last_time + 1) {
      throw std::runtime_error("row " + std::to_string(row) + ": non-contiguous time index " +
                               std::to_string(time) + " for unit " + std::to_string(unit) +
                               " (previous " + std::to_string(it->second.last_time) + ")");
    }
    Raw& r = it->second;
    r.last_time = time;
    for (std::size_t c = 0; c < kSettingColumns; ++c)
      r.settings.push_back(parse_field(fields[2 + c], row));
    for (std::size_t c = 0; c < kSensorColumns; ++c)
      r.sensors.push_back(parse_field(fields[2 + kSettingColumns + c], row));
    ++r.rows;
  }
  if (raws.empty()) throw std::runtime_error("data file " + path.string() + " holds no rows");

  TimeSeriesCube cube;
  cube.pattern = Pattern::non_cyclic;
  for (std::size_t j = 1; j <= kSensorColumns; ++j) cube.variables.push_back("S" + std::to_string(j));
  for (long long id : order) {
    const Raw& r = raws.at(id);
    UnitSeries u;
    u.id = id;
    u.length = r.rows;
    u.values.resize(kSensorColumns * r.rows);
    for (std::size_t k = 0; k < r.rows; ++k)
      for (std::size_t j = 0; j < kSensorColumns; ++j)
        u.values[j * r.rows + k] = r.sensors[k * kSensorColumns + j];
    u.settings.resize(kSettingColumns * r.rows);
    for (std::size_t k = 0; k < r.rows; ++k)
      for (std::size_t j = 0; j < kSettingColumns; ++j)
        u.settings[j * r.rows + k] = r.settings[k * kSettingColumns + j];
    cube.units.push_back(std::move(u));
  }
  return cube;
}

TimeSeriesCube load_cyclic_cycles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("data file " + path.string() + " is empty");
  {
    auto header = split_delim(line, ',');
    for (auto& h : header) {
      h.erase(std::remove_if(h.begin(), h.end(), [](unsigned char c) { return std::isspace(c); }),
              h.end());
    }
    const std::vector<std::string> expected = {"cycle", "time", "voltage", "current", "capacity"};
    if (header != expected)
      throw std::runtime_error("cyclic input header must be 'cycle,time,voltage,current,capacity'");
  }

  struct Raw {
    std::vector<double> rows;  // row-major rows x 3 (voltage, current, capacity)
    double last_time = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
  };
  std::map<long long, Raw> raws;  // keyed (and later emitted) by ascending cycle number

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (blank(line)) continue;
    auto fields = split_delim(line, ',');
    if (fields.size() != 5)
      throw std::runtime_error("row " + std::to_string(row) + ": expected 5 columns, got " +
                               std::to_string(fields.size()));
    long long cycle = static_cast<long long>(parse_field(fields[0], row));
    double time = parse_field(fields[1], row);
    Raw& r = raws[cycle];
    if (r.count > 0 && time <= r.last_time) {
      throw std::runtime_error("row " + std::to_string(row) + ": time " + std::to_string(time) +
                               " in cycle " + std::to_string(cycle) +
                               " is not strictly ascending (descending or duplicate key)");
    }
    r.last_time = time;
    r.rows.push_back(parse_field(fields[2], row));
    r.rows.push_back(parse_field(fields[3], row));
    r.rows.push_back(parse_field(fields[4], row));
    ++r.count;
  }
  if (raws.empty()) throw std::runtime_error("data file " + path.string() + " holds no cycles");

  TimeSeriesCube cube;
  cube.pattern = Pattern::cyclic;
  cube.variables = {"voltage", "current", "capacity"};
  for (const auto& [cycle, r] : raws) {
    UnitSeries u;
    u.id = cycle;
    u.length = r.count;
    u.values.resize(3 * r.count);
    for (std::size_t k = 0; k < r.count; ++k)
      for (std::size_t j = 0; j < 3; ++j) u.values[j * r.count + k] = r.rows[k * 3 + j];
    cube.units.push_back(std::move(u));
  }
  return cube;
}

std::pair<TimeSeriesCube, std::vector<std::string>> drop_constant_variables(
    const TimeSeriesCube& cube, double eps) {
  std::size_t j_count = cube.variable_count();
  std::vector<bool> keep(j_count, true);
  std::vector<std::string> dropped;

  for (std::size_t j = 0; j < j_count; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& u : cube.units)
      for (std::size_t k = 0; k < u.length; ++k) {
        double v = u.at(j, k);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    double range = hi - lo;
    double var = 0.0;
    if (range > 0.0) {
      // Variance of the range-scaled values, so the threshold is unit-free.
      double sum = 0.0, sumsq = 0.0;
      std::size_t n = 0;
      for (const auto& u : cube.units)
        for (std::size_t k = 0; k < u.length; ++k) {
          double v = (u.at(j, k) - lo) / range;
          sum += v;
          sumsq += v * v;
          ++n;
        }
      double meanv = sum / static_cast<double>(n);
      var = sumsq / static_cast<double>(n) - meanv * meanv;
    }
    if (var < eps) {
      keep[j] = false;
      dropped.push_back(cube.variables[j]);
    }
  }

  if (dropped.size() == j_count)
    throw std::runtime_error("drop_constant_variables: every variable is constant");

  TimeSeriesCube out;
  out.pattern = cube.pattern;
  for (std::size_t j = 0; j < j_count; ++j)
    if (keep[j]) out.variables.push_back(cube.variables[j]);
  for (const auto& u : cube.units) {
    UnitSeries nu;
    nu.id = u.id;
    nu.length = u.length;
    nu.settings = u.settings;
    nu.values.reserve(out.variables.size() * u.length);
    for (std::size_t j = 0; j < j_count; ++j) {
      if (!keep[j]) continue;
      nu.values.insert(nu.values.end(), u.values.begin() + j * u.length,
                       u.values.begin() + (j + 1) * u.length);
    }
    out.units.push_back(std::move(nu));
  }
  return {std::move(out), std::move(dropped)};
}

TimeSeriesCube truncate_tail(const TimeSeriesCube& cube, std::size_t keep) {
  if (keep == 0) throw std::invalid_argument("truncate_tail: keep must be positive");
  TimeSeriesCube out;
  out.pattern = cube.pattern;
  out.variables = cube.variables;
  std::size_t j_count = cube.variable_count();
  for (const auto& u : cube.units) {
    std::size_t kept = std::min(keep, u.length);
    std::size_t skip = u.length - kept;
    UnitSeries nu;
    nu.id = u.id;
    nu.length = kept;
    nu.values.reserve(j_count * kept);
    for (std::size_t j = 0; j < j_count; ++j)
      nu.values.insert(nu.values.end(), u.values.begin() + j * u.length + skip,
                       u.values.begin() + (j + 1) * u.length);
    if (!u.settings.empty()) {
      std::size_t s_count = u.settings.size() / u.length;
      nu.settings.reserve(s_count * kept);
      for (std::size_t j = 0; j < s_count; ++j)
        nu.settings.insert(nu.settings.end(), u.settings.begin() + j * u.length + skip,
                           u.settings.begin() + (j + 1) * u.length);
    }
    out.units.push_back(std::move(nu));
  }
  return out;
}

ScalingInfo fit_scaling(const TimeSeriesCube& cube, ScalingInfo::Variant variant) {
  std::size_t j_count = cube.variable_count();
  ScalingInfo s;
  s.variant = variant;
  s.vmin.assign(j_count, std::numeric_limits<double>::infinity());
  s.vmax.assign(j_count, -std::numeric_limits<double>::infinity());
  for (const auto& u : cube.units)
    for (std::size_t j = 0; j < j_count; ++j)
      for (std::size_t k = 0; k < u.length; ++k) {
        double v = u.at(j, k);
        s.vmin[j] = std::min(s.vmin[j], v);
        s.vmax[j] = std::max(s.vmax[j], v);
      }
  return s;
}

namespace {

double normalize_value(double x, double lo, double hi, ScalingInfo::Variant variant,
                       const std::string& var_name, bool clip) {
  if (variant == ScalingInfo::Variant::printed) {
    if (hi == 0.0) return 0.0;
    return (x - lo) / hi;
  }
  double range = hi - lo;
  if (range == 0.0) return 0.0;  // constant variable maps to 0
  if (!clip && (x < lo || x > hi)) {
    throw std::runtime_error("normalize: value " + std::to_string(x) + " of variable '" + var_name +
                             "' outside fitted range [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "] and clipping is disabled");
  }
  double v = (x - lo) / range;
  return clip ? std::clamp(v, 0.0, 1.0) : v;
}

double denormalize_value(double x, double lo, double hi, ScalingInfo::Variant variant) {
  if (variant == ScalingInfo::Variant::printed) return x * hi + lo;
  double range = hi - lo;
  if (range == 0.0) return lo;
  return x * range + lo;
}

void check_variable_count(const char* op, std::size_t got, std::size_t expected) {
  if (got != expected)
    throw std::invalid_argument(std::string(op) + ": cube has " + std::to_string(got) +
                                " variables but scaling was fitted on " + std::to_string(expected));
}

}  // namespace

TimeSeriesCube normalize(const TimeSeriesCube& cube, const ScalingInfo& scaling,
                         NormalizeOptions opts) {
  check_variable_count("normalize", cube.variable_count(), scaling.variable_count());
  TimeSeriesCube out = cube;
  for (auto& u : out.units)
    for (std::size_t j = 0; j < out.variable_count(); ++j)
      for (std::size_t k = 0; k < u.length; ++k)
        u.at(j, k) = normalize_value(u.at(j, k), scaling.vmin[j], scaling.vmax[j], scaling.variant,
                                     out.variables[j], opts.clip);
  return out;
}

TimeSeriesCube denormalize(const TimeSeriesCube& cube, const ScalingInfo& scaling) {
  check_variable_count("denormalize", cube.variable_count(), scaling.variable_count());
  TimeSeriesCube out = cube;
  for (auto& u : out.units)
    for (std::size_t j = 0; j < out.variable_count(); ++j)
      for (std::size_t k = 0; k < u.length; ++k)
        u.at(j, k) = denormalize_value(u.at(j, k), scaling.vmin[j], scaling.vmax[j], scaling.variant);
  return out;
}

void normalize_series(double* values, std::size_t variables, std::size_t length,
                      const ScalingInfo& scaling, NormalizeOptions opts) {
  check_variable_count("normalize", variables, scaling.variable_count());
  for (std::size_t j = 0; j < variables; ++j)
    for (std::size_t k = 0; k < length; ++k)
      values[j * length + k] = normalize_value(values[j * length + k], scaling.vmin[j],
                                               scaling.vmax[j], scaling.variant,
                                               "var" + std::to_string(j), opts.clip);
}

void denormalize_series(double* values, std::size_t variables, std::size_t length,
                        const ScalingInfo& scaling) {
  check_variable_count("denormalize", variables, scaling.variable_count());
  for (std::size_t j = 0; j < variables; ++j)
    for (std::size_t k = 0; k < length; ++k)
      values[j * length + k] =
          denormalize_value(values[j * length + k], scaling.vmin[j], scaling.vmax[j], scaling.variant);
}

SegmentedWindows segment(const TimeSeriesCube& cube, const SegmentConfig& cfg) {
  if (cfg.window == 0) throw std::invalid_argument("segment: window must be positive");
  if (cfg.step == 0) throw std::invalid_argument("segment: step must be positive");
  for (const auto& u : cube.units) {
    if (cfg.window > u.length)
      throw std::invalid_argument("segment: window " + std::to_string(cfg.window) +
                                  " exceeds length " + std::to_string(u.length) + " of unit " +
                                  std::to_string(u.id));
  }
  std::size_t j_count = cube.variable_count();
  std::size_t window = cfg.window;

  long long max_cycle = 0;
  if (cube.pattern == Pattern::cyclic)
    for (const auto& u : cube.units) max_cycle = std::max(max_cycle, u.id);

  SegmentedWindows out;
  out.pattern = cube.pattern;
  out.variables = cube.variables;
  out.window = window;
  for (const auto& u : cube.units) {
    std::size_t n_windows = (u.length - window) / cfg.step + 1;
    for (std::size_t w = 0; w < n_windows; ++w) {
      std::size_t start = w * cfg.step;
      for (std::size_t j = 0; j < j_count; ++j)
        out.values.insert(out.values.end(), u.values.begin() + j * u.length + start,
                          u.values.begin() + j * u.length + start + window);
      double cond;
      if (cube.pattern == Pattern::cyclic) {
        cond = max_cycle > 0 ? static_cast<double>(u.id) / static_cast<double>(max_cycle) : 0.0;
      } else {
        cond = u.length > window
                   ? static_cast<double>(start) / static_cast<double>(u.length - window)
                   : 0.0;
      }
      out.conditions.push_back(cond);
      out.parents.push_back(u.id);
      out.starts.push_back(start);
    }
  }
  return out;
}

RulLabels build_rul_labels(const TimeSeriesCube& cube, std::optional<double> cap) {
  if (cube.pattern != Pattern::non_cyclic)
    throw std::invalid_argument(
        "build_rul_labels: cyclic cubes take labels from the capacity variable, not linear RUL");
  if (cap && *cap <= 0.0) throw std::invalid_argument("build_rul_labels: cap must be positive");
  RulLabels out;
  out.capped = cap.has_value();
  out.cap = cap.value_or(0.0);
  for (const auto& u : cube.units) {
    std::vector<double> labels(u.length);
    for (std::size_t k = 0; k < u.length; ++k) {
      double v = static_cast<double>(u.length - k);
      labels[k] = cap ? std::min(*cap, v) : v;
    }
    out.per_unit.push_back(std::move(labels));
  }
  return out;
}

}  // namespace tsregen::data
