#pragma once

// Report emission. CSV uses a header row of field names and one decimal
// digit for percentages; JSON is lossless full precision with stable key
// order; markdown renders the same cells as CSV in a pipe table. Output is
// byte-deterministic given the payload.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsadv/eval.hpp"
#include "tsadv/text.hpp"

namespace tsadv {

enum class ReportFormat { csv, json, markdown };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw std::invalid_argument("unknown report format: " + s);
}

inline std::string_view sweep_metric_name(SweepMetric m) {
  return m == SweepMetric::accuracy ? "accuracy" : "targeted_success";
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + csv_escape(t.header[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_escape(row[i]);
    out += '\n';
  }
  return out;
}

inline std::string to_markdown(const Table& t) {
  std::string out = "|";
  for (const auto& h : t.header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += " --- |";
  out += '\n';
  for (const auto& row : t.rows) {
    out += "|";
    for (const auto& cell : row) out += " " + cell + " |";
    out += '\n';
  }
  return out;
}

inline const std::vector<std::string>& report_row_fields() {
  static const std::vector<std::string> fields = {
      "dataset",
      "original_accuracy",
      "universal_attack_accuracy",
      "fgsm_attack_accuracy",
      "bim_attack_accuracy",
      "fgsm_targeted_success",
      "bim_targeted_success",
      "advtrained_fgsm_accuracy",
      "advtrained_bim_accuracy"};
  return fields;
}

}  // namespace detail

inline void emit_report(const std::vector<ReportRow>& rows, ReportFormat format,
                        const std::filesystem::path& path) {
  if (rows.empty()) throw std::invalid_argument("emit_report: empty payload");
  if (format == ReportFormat::json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : rows) {
      doc.push_back({{"dataset", r.dataset},
                     {"original_accuracy", r.original_accuracy},
                     {"universal_attack_accuracy", r.universal_attack_accuracy},
                     {"fgsm_attack_accuracy", r.fgsm_attack_accuracy},
                     {"bim_attack_accuracy", r.bim_attack_accuracy},
                     {"fgsm_targeted_success", r.fgsm_targeted_success},
                     {"bim_targeted_success", r.bim_targeted_success},
                     {"advtrained_fgsm_accuracy", r.advtrained_fgsm_accuracy},
                     {"advtrained_bim_accuracy", r.advtrained_bim_accuracy}});
    }
    detail::write_text_file(path, doc.dump(2) + "\n");
    return;
  }
  detail::Table t;
  t.header = detail::report_row_fields();
  for (const auto& r : rows) {
    t.rows.push_back({r.dataset, format_pct(r.original_accuracy), format_pct(r.universal_attack_accuracy),
                      format_pct(r.fgsm_attack_accuracy), format_pct(r.bim_attack_accuracy),
                      format_pct(r.fgsm_targeted_success), format_pct(r.bim_targeted_success),
                      format_pct(r.advtrained_fgsm_accuracy), format_pct(r.advtrained_bim_accuracy)});
  }
  detail::write_text_file(path, format == ReportFormat::csv ? detail::to_csv(t) : detail::to_markdown(t));
}

inline void emit_report(const std::vector<SweepPoint>& points, ReportFormat format,
                        const std::filesystem::path& path) {
  if (points.empty()) throw std::invalid_argument("emit_report: empty payload");
  if (format == ReportFormat::json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& p : points)
      doc.push_back({{"eps", p.eps},
                     {"fgsm_value", p.fgsm_value},
                     {"bim_value", p.bim_value},
                     {"metric", std::string(sweep_metric_name(p.metric))}});
    detail::write_text_file(path, doc.dump(2) + "\n");
    return;
  }
  detail::Table t;
  t.header = {"eps", "fgsm_value", "bim_value", "metric"};
  for (const auto& p : points)
    t.rows.push_back({format_double(p.eps), format_pct(p.fgsm_value), format_pct(p.bim_value),
                      std::string(sweep_metric_name(p.metric))});
  detail::write_text_file(path, format == ReportFormat::csv ? detail::to_csv(t) : detail::to_markdown(t));
}

inline void emit_report(const std::vector<GeneralizationPoint>& curve, ReportFormat format,
                        const std::filesystem::path& path) {
  if (curve.empty()) throw std::invalid_argument("emit_report: empty payload");
  if (format == ReportFormat::json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& p : curve) doc.push_back({{"fraction", p.fraction}, {"test_success", p.test_success}});
    detail::write_text_file(path, doc.dump(2) + "\n");
    return;
  }
  detail::Table t;
  t.header = {"fraction", "test_success"};
  for (const auto& p : curve) t.rows.push_back({format_double(p.fraction), format_pct(p.test_success)});
  detail::write_text_file(path, format == ReportFormat::csv ? detail::to_csv(t) : detail::to_markdown(t));
}

inline void emit_report(const std::vector<DefenseCurveRow>& rows, ReportFormat format,
                        const std::filesystem::path& path) {
  if (rows.empty()) throw std::invalid_argument("emit_report: empty payload");
  if (format == ReportFormat::json) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : rows)
      doc.push_back({{"eps", r.eps}, {"model", r.model}, {"method", r.method}, {"accuracy", r.accuracy}});
    detail::write_text_file(path, doc.dump(2) + "\n");
    return;
  }
  detail::Table t;
  t.header = {"eps", "model", "method", "accuracy"};
  for (const auto& r : rows) t.rows.push_back({format_double(r.eps), r.model, r.method, format_pct(r.accuracy)});
  detail::write_text_file(path, format == ReportFormat::csv ? detail::to_csv(t) : detail::to_markdown(t));
}

// --- CSV parsing (round-trip support for the report files) ---

namespace detail {

inline std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty report file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (parse_csv_line(line) != expected_header)
    throw std::runtime_error("unexpected header in report file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() != expected_header.size())
      throw std::runtime_error("ragged row in report file: " + path.string());
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline double parse_field(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  if (!parse_double(s, v)) throw std::runtime_error("bad numeric field '" + s + "' in " + path.string());
  return v;
}

}  // namespace detail

inline std::vector<ReportRow> parse_report_rows_csv(const std::filesystem::path& path) {
  const auto raw = detail::read_csv(path, detail::report_row_fields());
  std::vector<ReportRow> rows;
  rows.reserve(raw.size());
  for (const auto& f : raw) {
    ReportRow r;
    r.dataset = f[0];
    r.original_accuracy = detail::parse_field(f[1], path);
    r.universal_attack_accuracy = detail::parse_field(f[2], path);
    r.fgsm_attack_accuracy = detail::parse_field(f[3], path);
    r.bim_attack_accuracy = detail::parse_field(f[4], path);
    r.fgsm_targeted_success = detail::parse_field(f[5], path);
    r.bim_targeted_success = detail::parse_field(f[6], path);
    r.advtrained_fgsm_accuracy = detail::parse_field(f[7], path);
    r.advtrained_bim_accuracy = detail::parse_field(f[8], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<SweepPoint> parse_sweep_csv(const std::filesystem::path& path) {
  const auto raw = detail::read_csv(path, {"eps", "fgsm_value", "bim_value", "metric"});
  std::vector<SweepPoint> points;
  points.reserve(raw.size());
  for (const auto& f : raw) {
    SweepPoint p;
    p.eps = detail::parse_field(f[0], path);
    p.fgsm_value = detail::parse_field(f[1], path);
    p.bim_value = detail::parse_field(f[2], path);
    p.metric = f[3] == "accuracy" ? SweepMetric::accuracy : SweepMetric::targeted_success;
    points.push_back(p);
  }
  return points;
}

}  // namespace tsadv
