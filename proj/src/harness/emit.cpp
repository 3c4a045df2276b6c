#include <charconv>
#include <fstream>

#include "dmoe/error.hpp"
#include "dmoe/harness.hpp"
#include "json.hpp"

namespace dmoe {

namespace {

using nlohmann::json;

json row_json(const RunRow& r) {
  json j = {{"scheme", r.scheme},
            {"seed", r.seed},
            {"layer", r.layer},
            {"comm_J", r.comm_j},
            {"comp_J", r.comp_j},
            {"total_J", r.total_j},
            {"per_token_J", r.per_token_j},
            {"bcd_iters", r.bcd_iters},
            {"fallback_rate", r.fallback_rate},
            {"backward_comm_J", r.backward_comm_j},
            {"qos_score_mean_proxy", r.qos_score_mean},
            {"converged", r.converged}};
  j["oracle_match"] = r.oracle_match ? json(*r.oracle_match) : json(nullptr);
  return j;
}

RunRow row_from_json(const json& j) {
  RunRow r;
  r.scheme = j.at("scheme").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.layer = j.at("layer").get<std::size_t>();
  r.comm_j = j.at("comm_J").get<double>();
  r.comp_j = j.at("comp_J").get<double>();
  r.total_j = j.at("total_J").get<double>();
  r.per_token_j = j.at("per_token_J").get<double>();
  r.bcd_iters = j.at("bcd_iters").get<std::size_t>();
  r.fallback_rate = j.at("fallback_rate").get<double>();
  r.backward_comm_j = j.at("backward_comm_J").get<double>();
  r.qos_score_mean = j.at("qos_score_mean_proxy").get<double>();
  r.converged = j.at("converged").get<bool>();
  if (!j.at("oracle_match").is_null()) r.oracle_match = j.at("oracle_match").get<bool>();
  return r;
}

// RFC 4180 quoting for labels such as jesa(0.9,2).
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string report_csv(const RunReport& report) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const RunRow& r : report.rows) {
    out += csv_field(r.scheme);
    out += ',' + std::to_string(r.seed);
    out += ',' + std::to_string(r.layer);
    out += ',' + format_double(r.comm_j);
    out += ',' + format_double(r.comp_j);
    out += ',' + format_double(r.total_j);
    out += ',' + format_double(r.per_token_j);
    out += ',' + std::to_string(r.bcd_iters);
    out += ',' + format_double(r.fallback_rate);
    out += '\n';
  }
  return out;
}

std::string report_json(const RunReport& report) {
  json doc;
  doc["version"] = report.version;
  doc["spec"] = json::parse(dump_scenario(report.spec));
  doc["rows"] = json::array();
  for (const RunRow& r : report.rows) doc["rows"].push_back(row_json(r));
  doc["errors"] = json::array();
  for (const CellError& e : report.errors) {
    doc["errors"].push_back({{"scheme", e.scheme}, {"seed", e.seed}, {"message", e.message}});
  }
  return doc.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
    RunReport report;
    report.version = doc.at("version").get<std::string>();
    report.spec = parse_scenario(doc.at("spec").dump());
    for (const json& r : doc.at("rows")) report.rows.push_back(row_from_json(r));
    for (const json& e : doc.at("errors")) {
      report.errors.push_back({e.at("scheme").get<std::string>(), e.at("seed").get<std::uint64_t>(),
                               e.at("message").get<std::string>()});
    }
    return report;
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("report: ") + e.what());
  }
}

void emit_results(const RunReport& report, EmitFormat format,
                  const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << (format == EmitFormat::kCsv ? report_csv(report) : report_json(report));
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace dmoe
