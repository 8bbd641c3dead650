#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cmbench/evaluate.hpp"

namespace cmbench {

inline constexpr std::string_view kReportSchema = "cmbench.report/1";
/// Placeholder for values that are undefined (e.g. MedErr with no successes).
inline constexpr std::string_view kMissingValue = "—";

struct MetricValue {
  std::string name;
  std::optional<double> value;

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

struct ReportRow {
  std::string matcher_id;
  std::string category;
  std::string task;
  std::size_t n_pairs = 0;
  double success_rate = 0.0;
  std::vector<MetricValue> metrics;
  std::string fingerprint;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

enum class ReportFormat { Csv, Json };

/// Canonical description of every setting that can change a number in the
/// report. Contains no commas so it fits in a CSV cell.
std::string config_fingerprint(const EvalSettings& s);

/// "auc@5", "sr@3m" style column names.
std::string threshold_column(std::string_view prefix, double tau, std::string_view unit = "");

/// Category order sparse, semi-dense, dense, then anything else; primary
/// metric descending (missing last); then matcher id.
void sort_rows(std::vector<ReportRow>& rows);

/// Throws SchemaViolation when rows disagree on metric columns and
/// FingerprintMismatch when fingerprints differ and force is false.
void check_compatible(const std::vector<ReportRow>& rows, bool force);

void write_csv(std::ostream& out, const std::vector<ReportRow>& rows);
void write_json(std::ostream& out, const std::vector<ReportRow>& rows);
void write_report(std::ostream& out, const std::vector<ReportRow>& rows, ReportFormat format);
void write_text_table(std::ostream& out, const std::vector<ReportRow>& rows);

/// Throws ParseError / SchemaViolation.
std::vector<ReportRow> read_csv(std::istream& in, const std::string& source);
std::vector<ReportRow> read_json(std::istream& in, const std::string& source);
/// Format chosen by extension (.json, anything else is CSV).
std::vector<ReportRow> read_report(const std::filesystem::path& path);

std::string format_number(double v);

}  // namespace cmbench
