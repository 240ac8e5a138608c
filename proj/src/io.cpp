#include "tsregen/io.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tsregen::io {

namespace {

template <typename T>
void write_raw(const std::filesystem::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(T) != 0)
    throw std::runtime_error(path.string() + " has a size that is not a multiple of the element size");
  std::vector<T> values(bytes / sizeof(T));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw std::runtime_error("short read from " + path.string());
  return values;
}

}  // namespace

void write_doubles(const std::filesystem::path& path, const std::vector<double>& values) {
  write_raw(path, values);
}
std::vector<double> read_doubles(const std::filesystem::path& path) {
  return read_raw<double>(path);
}
void write_int64s(const std::filesystem::path& path, const std::vector<long long>& values) {
  write_raw(path, values);
}
std::vector<long long> read_int64s(const std::filesystem::path& path) {
  return read_raw<long long>(path);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  auto bytes = static_cast<std::size_t>(in.tellg());
  std::string text(bytes, '\0');
  in.seekg(0);
  in.read(text.data(), static_cast<std::streamsize>(bytes));
  return text;
}

void write_manifest(const std::filesystem::path& path, const nlohmann::json& manifest) {
  write_text(path, manifest.dump(2) + "\n");
}

nlohmann::json read_manifest(const std::filesystem::path& path) {
  return nlohmann::json::parse(read_text(path));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xF];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

nlohmann::json scaling_to_json(const data::ScalingInfo& scaling) {
  nlohmann::json j;
  j["vmin"] = scaling.vmin;
  j["vmax"] = scaling.vmax;
  j["variant"] = scaling.variant == data::ScalingInfo::Variant::range01 ? "range01" : "printed";
  return j;
}

data::ScalingInfo scaling_from_json(const nlohmann::json& j) {
  data::ScalingInfo s;
  s.vmin = j.at("vmin").get<std::vector<double>>();
  s.vmax = j.at("vmax").get<std::vector<double>>();
  s.variant = j.at("variant").get<std::string>() == "printed" ? data::ScalingInfo::Variant::printed
                                                              : data::ScalingInfo::Variant::range01;
  return s;
}

void save_cube(const std::filesystem::path& dir, const data::TimeSeriesCube& cube) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["kind"] = "cube";
  m["pattern"] = data::pattern_name(cube.pattern);
  m["variables"] = cube.variables;
  nlohmann::json units = nlohmann::json::array();
  std::vector<double> values;
  for (const auto& u : cube.units) {
    units.push_back({{"id", u.id}, {"length", u.length}});
    values.insert(values.end(), u.values.begin(), u.values.end());
  }
  m["units"] = units;
  write_manifest(dir / "manifest.json", m);
  write_doubles(dir / "values.bin", values);
}

data::TimeSeriesCube load_cube(const std::filesystem::path& dir) {
  auto m = read_manifest(dir / "manifest.json");
  if (m.value("kind", "") != "cube")
    throw std::runtime_error(dir.string() + " does not hold a cube artifact");
  data::TimeSeriesCube cube;
  cube.pattern = data::pattern_from_name(m.at("pattern").get<std::string>());
  cube.variables = m.at("variables").get<std::vector<std::string>>();
  auto values = read_doubles(dir / "values.bin");
  std::size_t offset = 0;
  for (const auto& ju : m.at("units")) {
    data::UnitSeries u;
    u.id = ju.at("id").get<long long>();
    u.length = ju.at("length").get<std::size_t>();
    std::size_t n = cube.variables.size() * u.length;
    if (offset + n > values.size()) throw std::runtime_error("values.bin shorter than manifest units");
    u.values.assign(values.begin() + offset, values.begin() + offset + n);
    offset += n;
    cube.units.push_back(std::move(u));
  }
  if (offset != values.size()) throw std::runtime_error("values.bin longer than manifest units");
  return cube;
}

void save_windows(const std::filesystem::path& dir, const data::SegmentedWindows& windows,
                  const data::ScalingInfo& scaling, const nlohmann::json& extra,
                  const std::vector<double>* labels) {
  std::filesystem::create_directories(dir);
  nlohmann::json m;
  m["kind"] = "windows";
  m["pattern"] = data::pattern_name(windows.pattern);
  m["variables"] = windows.variables;
  m["window"] = windows.window;
  m["count"] = windows.count();
  m["scaling"] = scaling_to_json(scaling);
  m["has_labels"] = labels != nullptr;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  write_manifest(dir / "manifest.json", m);
  write_doubles(dir / "values.bin", windows.values);
  write_doubles(dir / "conditions.bin", windows.conditions);
  write_int64s(dir / "parents.bin", windows.parents);
  std::vector<long long> starts(windows.starts.begin(), windows.starts.end());
  write_int64s(dir / "starts.bin", starts);
  if (labels) write_doubles(dir / "labels.bin", *labels);
}

data::SegmentedWindows load_windows(const std::filesystem::path& dir, data::ScalingInfo* scaling,
                                    nlohmann::json* manifest_out, std::vector<double>* labels) {
  auto m = read_manifest(dir / "manifest.json");
  if (m.value("kind", "") != "windows")
    throw std::runtime_error(dir.string() + " does not hold a segmented-window artifact");
  data::SegmentedWindows w;
  w.pattern = data::pattern_from_name(m.at("pattern").get<std::string>());
  w.variables = m.at("variables").get<std::vector<std::string>>();
  w.window = m.at("window").get<std::size_t>();
  w.values = read_doubles(dir / "values.bin");
  w.conditions = read_doubles(dir / "conditions.bin");
  w.parents = read_int64s(dir / "parents.bin");
  auto starts = read_int64s(dir / "starts.bin");
  w.starts.assign(starts.begin(), starts.end());
  std::size_t expect = w.count() * w.variable_count() * w.window;
  if (w.values.size() != expect)
    throw std::runtime_error(dir.string() + ": values.bin size disagrees with manifest");
  if (scaling) *scaling = scaling_from_json(m.at("scaling"));
  if (manifest_out) *manifest_out = m;
  if (labels && m.value("has_labels", false)) *labels = read_doubles(dir / "labels.bin");
  return w;
}

}  // namespace tsregen::io
