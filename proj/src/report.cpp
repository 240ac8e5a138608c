#include "tsregen/report.hpp"

#include <sstream>

#include <json.hpp>

#include "tsregen/io.hpp"

namespace tsregen::metrics {

void emit_report(const EvalReport& report, const std::filesystem::path& json_path) {
  nlohmann::json j;
  j["pattern"] = report.pattern;
  j["n_test"] = report.n_test();
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"unit", e.unit},
                       {"actual", e.actual},
                       {"predicted", e.predicted},
                       {"error", e.error()}});
  }
  j["errors"] = entries;
  j["rmse"] = report.rmse;
  j["sf"] = report.sf;
  if (report.auroc) j["auroc"] = *report.auroc;
  j["histogram"] = {{"width", report.histogram.width},
                    {"start", report.histogram.start},
                    {"signed", report.histogram.signed_bins},
                    {"bins", report.histogram.counts}};
  if (!report.padded_units.empty()) j["padded_units"] = report.padded_units;
  if (report.predicted_eol) j["predicted_eol"] = *report.predicted_eol;
  if (report.actual_eol) j["actual_eol"] = *report.actual_eol;
  if (report.rul_error) j["rul_error"] = *report.rul_error;
  if (report.censored) j["censored"] = true;

  io::write_manifest(json_path, j);

  std::ostringstream csv;
  csv << "unit_id,actual,predicted,error\n";
  for (const auto& e : report.entries) {
    csv << e.unit << ',' << io::format_double(e.actual) << ',' << io::format_double(e.predicted)
        << ',' << io::format_double(e.error()) << '\n';
  }
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  io::write_text(csv_path, csv.str());
}

EvalReport load_report(const std::filesystem::path& json_path) {
  auto j = io::read_manifest(json_path);
  EvalReport r;
  r.pattern = j.at("pattern").get<std::string>();
  for (const auto& je : j.at("errors")) {
    EvalEntry e;
    e.unit = je.at("unit").get<long long>();
    e.actual = je.at("actual").get<double>();
    e.predicted = je.at("predicted").get<double>();
    r.entries.push_back(e);
  }
  r.rmse = j.at("rmse").get<double>();
  r.sf = j.at("sf").get<double>();
  if (j.contains("auroc")) r.auroc = j.at("auroc").get<double>();
  const auto& jh = j.at("histogram");
  r.histogram.width = jh.at("width").get<double>();
  r.histogram.start = jh.at("start").get<double>();
  r.histogram.signed_bins = jh.at("signed").get<bool>();
  r.histogram.counts = jh.at("bins").get<std::vector<std::size_t>>();
  if (j.contains("padded_units"))
    r.padded_units = j.at("padded_units").get<std::vector<long long>>();
  if (j.contains("predicted_eol")) r.predicted_eol = j.at("predicted_eol").get<long long>();
  if (j.contains("actual_eol")) r.actual_eol = j.at("actual_eol").get<long long>();
  if (j.contains("rul_error")) r.rul_error = j.at("rul_error").get<long long>();
  r.censored = j.value("censored", false);
  return r;
}

}  // namespace tsregen::metrics
