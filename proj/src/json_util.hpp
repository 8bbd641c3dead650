#pragma once

// Typed field access for the JSON-lines formats. Every failure is reported
// as a cmbench::Error naming source, line and field.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cmbench/error.hpp"
#include "cmbench/geometry.hpp"

namespace cmbench::detail {

using nlohmann::json;

struct Where {
  std::string source;
  std::size_t line = 0;

  std::string prefix() const { return source + ":" + std::to_string(line) + ": "; }
};

[[noreturn]] inline void schema_error(const Where& w, std::string_view field, std::string_view what) {
  throw Error(ErrorCode::SchemaViolation, w.prefix() + "field '" + std::string(field) + "': " + std::string(what));
}

inline json parse_line(std::string_view text, const Where& w) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, w.prefix() + "malformed JSON");
  if (!j.is_object()) throw Error(ErrorCode::ParseError, w.prefix() + "record is not a JSON object");
  return j;
}

inline const json& require(const json& obj, std::string_view name, const Where& w) {
  auto it = obj.find(name);
  if (it == obj.end()) schema_error(w, name, "missing");
  return *it;
}

inline double as_number(const json& v, std::string_view name, const Where& w) {
  if (!v.is_number()) schema_error(w, name, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema_error(w, name, "expected a finite number");
  return d;
}

inline double get_number(const json& obj, std::string_view name, const Where& w) {
  return as_number(require(obj, name, w), name, w);
}

inline std::int64_t get_integer(const json& obj, std::string_view name, const Where& w) {
  const json& v = require(obj, name, w);
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX)) schema_error(w, name, "integer out of range");
    return static_cast<std::int64_t>(u);
  }
  if (!v.is_number_integer()) schema_error(w, name, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t get_unsigned(const json& obj, std::string_view name, const Where& w) {
  const json& v = require(obj, name, w);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) schema_error(w, name, "expected a non-negative integer");
  return static_cast<std::uint64_t>(v.get<std::int64_t>());
}

inline std::string get_string(const json& obj, std::string_view name, const Where& w) {
  const json& v = require(obj, name, w);
  if (!v.is_string()) schema_error(w, name, "expected a string");
  return v.get<std::string>();
}

inline std::string get_nonempty_string(const json& obj, std::string_view name, const Where& w) {
  std::string s = get_string(obj, name, w);
  if (s.empty()) schema_error(w, name, "must not be empty");
  return s;
}

inline std::string get_optional_string(const json& obj, std::string_view name, const Where& w) {
  auto it = obj.find(name);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) schema_error(w, name, "expected a string");
  return it->get<std::string>();
}

inline std::vector<double> as_number_array(const json& v, std::string_view name, const Where& w) {
  if (!v.is_array()) schema_error(w, name, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& e : v) out.push_back(as_number(e, name, w));
  return out;
}

inline std::vector<double> get_number_array(const json& obj, std::string_view name, const Where& w,
                                            std::size_t expected = 0) {
  std::vector<double> out = as_number_array(require(obj, name, w), name, w);
  if (expected != 0 && out.size() != expected) {
    schema_error(w, name, "expected " + std::to_string(expected) + " numbers");
  }
  return out;
}

inline std::vector<Point2> get_points(const json& obj, std::string_view name, const Where& w) {
  const json& v = require(obj, name, w);
  if (!v.is_array()) schema_error(w, name, "expected an array of [x, y] pairs");
  std::vector<Point2> out;
  out.reserve(v.size());
  for (const json& p : v) {
    if (!p.is_array() || p.size() != 2) schema_error(w, name, "expected [x, y]");
    out.push_back({as_number(p[0], name, w), as_number(p[1], name, w)});
  }
  return out;
}

inline json points_to_json(const std::vector<Point2>& pts) {
  json arr = json::array();
  for (const Point2& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

inline void check_schema(const json& obj, std::string_view expected, const Where& w) {
  const std::string s = get_string(obj, "schema", w);
  if (s != expected) schema_error(w, "schema", "expected '" + std::string(expected) + "', got '" + s + "'");
}

}  // namespace cmbench::detail
