#include "cmbench/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cmbench/error.hpp"
#include "json_util.hpp"

namespace cmbench {

namespace {

const std::vector<std::string> kFixedColumns = {"matcher_id", "category", "task", "n_pairs", "success_rate"};

int category_rank(const std::string& c) {
  if (c == "sparse") return 0;
  if (c == "semi-dense") return 1;
  if (c == "dense") return 2;
  return 3;
}

std::optional<double> primary_metric(const ReportRow& r) {
  for (std::string_view prefix : {"auc@", "sr@", "adaptive"}) {
    for (const auto& m : r.metrics) {
      if (m.name.starts_with(prefix)) return m.value;
    }
  }
  return r.metrics.empty() ? std::optional<double>{} : r.metrics.front().value;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void check_cell(const std::string& v, std::string_view field) {
  if (v.find_first_of(",\"\n\r") != std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, std::string(field) + " '" + v + "' cannot be written to CSV");
  }
}

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string value_text(const std::optional<double>& v) { return v ? format_number(*v) : std::string(kMissingValue); }

std::vector<std::string> header_of(const std::vector<ReportRow>& rows) {
  std::vector<std::string> h = kFixedColumns;
  if (!rows.empty()) {
    for (const auto& m : rows.front().metrics) h.push_back(m.name);
  }
  h.emplace_back("fingerprint");
  return h;
}

std::vector<std::string> cells_of(const ReportRow& r) {
  std::vector<std::string> c = {r.matcher_id, r.category, r.task, std::to_string(r.n_pairs),
                                format_number(r.success_rate)};
  for (const auto& m : r.metrics) c.push_back(value_text(m.value));
  c.push_back(r.fingerprint);
  return c;
}

}  // namespace

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string config_fingerprint(const EvalSettings& s) {
  std::ostringstream out;
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
    return std::string(buf, res.ptr);
  };
  const auto& r = s.ransac;
  const auto& p = s.preprocess;
  out << "ransac:thr=" << num(r.threshold) << ";iters=" << r.max_iterations << ";conf=" << num(r.confidence)
      << ";seed=" << r.seed << "|resize=" << s.resize_max << "|cap=" << s.max_matches
      << "|branch=" << branch_name(s.branch) << "|pre:sigma=" << num(p.unsharp_sigma)
      << ";amount=" << num(p.unsharp_amount) << ";lcn=" << p.lcn_window << ";eps=" << num(p.lcn_epsilon)
      << ";order=normalize-rescale;morph=" << p.morph_radius;
  return out.str();
}

std::string threshold_column(std::string_view prefix, double tau, std::string_view unit) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", tau);
  return std::string(prefix) + "@" + buf + std::string(unit);
}

void sort_rows(std::vector<ReportRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
    const int ca = category_rank(a.category), cb = category_rank(b.category);
    if (ca != cb) return ca < cb;
    if (ca == 3 && a.category != b.category) return a.category < b.category;
    const auto ma = primary_metric(a), mb = primary_metric(b);
    if (ma.has_value() != mb.has_value()) return ma.has_value();
    if (ma && *ma != *mb) return *ma > *mb;
    if (a.matcher_id != b.matcher_id) return a.matcher_id < b.matcher_id;
    return a.task < b.task;
  });
}

void check_compatible(const std::vector<ReportRow>& rows, bool force) {
  if (rows.empty()) return;
  const auto& first = rows.front();
  for (const auto& r : rows) {
    if (r.fingerprint.empty()) throw Error(ErrorCode::SchemaViolation, "row '" + r.matcher_id + "' has no fingerprint");
    bool same = r.metrics.size() == first.metrics.size();
    for (std::size_t i = 0; same && i < r.metrics.size(); ++i) same = r.metrics[i].name == first.metrics[i].name;
    if (!same) {
      throw Error(ErrorCode::SchemaViolation,
                  "rows for tasks '" + first.task + "' and '" + r.task + "' have different metric columns");
    }
    if (!force && r.fingerprint != first.fingerprint) {
      throw Error(ErrorCode::FingerprintMismatch,
                  "'" + first.fingerprint + "' vs '" + r.fingerprint + "' (use --force to merge anyway)");
    }
  }
}

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  check_compatible(rows, true);
  const auto header = header_of(rows);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& r : rows) {
    check_cell(r.matcher_id, "matcher_id");
    check_cell(r.category, "category");
    check_cell(r.task, "task");
    check_cell(r.fingerprint, "fingerprint");
    const auto cells = cells_of(r);
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
}

void write_json(std::ostream& out, const std::vector<ReportRow>& rows) {
  nlohmann::ordered_json doc;
  doc["schema"] = kReportSchema;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["matcher_id"] = r.matcher_id;
    j["category"] = r.category;
    j["task"] = r.task;
    j["n_pairs"] = r.n_pairs;
    j["success_rate"] = r.success_rate;
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (const auto& v : r.metrics) {
      if (v.value) {
        m[v.name] = *v.value;
      } else {
        m[v.name] = nullptr;
      }
    }
    j["metrics"] = std::move(m);
    j["fingerprint"] = r.fingerprint;
    doc["rows"].push_back(std::move(j));
  }
  out << doc.dump(2) << '\n';
}

void write_report(std::ostream& out, const std::vector<ReportRow>& rows, ReportFormat format) {
  if (format == ReportFormat::Json) {
    write_json(out, rows);
  } else {
    write_csv(out, rows);
  }
}

void write_text_table(std::ostream& out, const std::vector<ReportRow>& rows) {
  auto header = header_of(rows);
  header.pop_back();  // fingerprint goes below the table
  std::vector<std::vector<std::string>> table{header};
  for (const auto& r : rows) {
    auto c = cells_of(r);
    c.pop_back();
    table.push_back(std::move(c));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : table) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
  }
  for (const auto& row : table) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const bool numeric = i >= 3;
      const std::string pad(width[i] - display_width(row[i]), ' ');
      if (i) line += "  ";
      line += numeric ? pad + row[i] : row[i] + pad;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  std::vector<std::string> prints;
  for (const auto& r : rows) {
    if (std::find(prints.begin(), prints.end(), r.fingerprint) == prints.end()) prints.push_back(r.fingerprint);
  }
  for (const auto& p : prints) out << "config: " << p << '\n';
}

std::vector<ReportRow> read_csv(std::istream& in, const std::string& source) {
  std::string line;
  detail::Where w{source, 1};
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, source + ": empty report");
  const auto header = split_csv(line);
  if (header.size() < kFixedColumns.size() + 1 || header.back() != "fingerprint" ||
      !std::equal(kFixedColumns.begin(), kFixedColumns.end(), header.begin())) {
    throw Error(ErrorCode::SchemaViolation, w.prefix() + "unexpected report header");
  }
  std::vector<ReportRow> rows;
  while (std::getline(in, line)) {
    ++w.line;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::ParseError, w.prefix() + "expected " + std::to_string(header.size()) + " cells");
    }
    ReportRow r;
    r.matcher_id = cells[0];
    r.category = cells[1];
    r.task = cells[2];
    auto number = [&](const std::string& text, const std::string& field) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != text.size() || text.empty() || !std::isfinite(v)) {
        throw Error(ErrorCode::ParseError, w.prefix() + "field '" + field + "': bad number '" + text + "'");
      }
      return v;
    };
    const double n = number(cells[3], "n_pairs");
    if (n < 0 || n != std::floor(n)) throw Error(ErrorCode::SchemaViolation, w.prefix() + "field 'n_pairs'");
    r.n_pairs = static_cast<std::size_t>(n);
    r.success_rate = number(cells[4], "success_rate");
    for (std::size_t i = kFixedColumns.size(); i + 1 < cells.size(); ++i) {
      MetricValue m{header[i], std::nullopt};
      if (cells[i] != kMissingValue) m.value = number(cells[i], header[i]);
      r.metrics.push_back(std::move(m));
    }
    r.fingerprint = cells.back();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> read_json(std::istream& in, const std::string& source) {
  const detail::Where w{source, 1};
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, source + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("schema", std::string()) != kReportSchema) {
    detail::schema_error(w, "schema", "expected " + std::string(kReportSchema));
  }
  if (!doc.contains("rows") || !doc["rows"].is_array()) detail::schema_error(w, "rows", "expected an array");
  std::vector<ReportRow> rows;
  for (const auto& j : doc["rows"]) {
    try {
      ReportRow r;
      r.matcher_id = j.at("matcher_id").get<std::string>();
      r.category = j.at("category").get<std::string>();
      r.task = j.at("task").get<std::string>();
      r.n_pairs = j.at("n_pairs").get<std::size_t>();
      r.success_rate = j.at("success_rate").get<double>();
      for (const auto& [name, v] : j.at("metrics").items()) {
        MetricValue m{name, std::nullopt};
        if (!v.is_null()) m.value = v.get<double>();
        r.metrics.push_back(std::move(m));
      }
      r.fingerprint = j.at("fingerprint").get<std::string>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, source + ": malformed row: " + e.what());
    }
  }
  return rows;
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open report " + path.string());
  return path.extension() == ".json" ? read_json(in, path.string()) : read_csv(in, path.string());
}

}  // namespace cmbench
