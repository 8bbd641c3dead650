#include "cmbench/ingest.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include "json_util.hpp"

namespace cmbench {

namespace {

using detail::json;
using detail::Where;

constexpr double kBoundsSlack = 1.0;
constexpr double kTruthTolerance = 1e-6;

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

FrameSize parse_size(const json& v, std::string_view name, const Where& w) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    detail::schema_error(w, name, "expected [width, height] integers");
  }
  const auto width = v[0].get<std::int64_t>();
  const auto height = v[1].get<std::int64_t>();
  if (width <= 0 || height <= 0 || width > 1'000'000 || height > 1'000'000) {
    detail::schema_error(w, name, "dimensions must be positive");
  }
  return {static_cast<int>(width), static_cast<int>(height)};
}

json size_json(const FrameSize& s) { return json::array({s.width, s.height}); }

const json& require_object(const json& obj, std::string_view name, const Where& w) {
  const json& v = detail::require(obj, name, w);
  if (!v.is_object()) detail::schema_error(w, name, "expected an object");
  return v;
}

CameraIntrinsics parse_intrinsics(const json& v, std::string_view name, const Where& w) {
  if (!v.is_object()) detail::schema_error(w, name, "expected {fx, fy, cx, cy}");
  CameraIntrinsics k{detail::get_number(v, "fx", w), detail::get_number(v, "fy", w), detail::get_number(v, "cx", w),
                     detail::get_number(v, "cy", w)};
  if (!k.is_valid()) detail::schema_error(w, name, "focal lengths must be positive");
  return k;
}

json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}};
}

json matrix_json(const Eigen::Matrix3d& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  }
  return a;
}

Eigen::Matrix3d matrix_from(const std::vector<double>& v) {
  Eigen::Matrix3d m;
  m << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return m;
}

std::string_view expected_truth_type(Task t) {
  switch (t) {
    case Task::Homography: return "homography";
    case Task::Pose: return "pose";
    case Task::Geo:
    case Task::GeoHard: return "geo";
  }
  return "";
}

GroundTruth parse_truth(const json& gt, Task task, const std::filesystem::path& base_dir,
                        const ManifestLoadOptions& options, const Where& w) {
  const std::string type = detail::get_string(gt, "type", w);
  if (type != expected_truth_type(task)) {
    detail::schema_error(w, "ground_truth.type", "task '" + std::string(task_name(task)) + "' requires '" +
                                                     std::string(expected_truth_type(task)) + "' ground truth, got '" +
                                                     type + "'");
  }
  if (type == "homography") {
    HomographyTruth t;
    t.seed = detail::get_unsigned(gt, "seed", w);
    const auto width = detail::get_integer(gt, "width", w);
    const auto height = detail::get_integer(gt, "height", w);
    if (width <= 0 || height <= 0 || width > 1'000'000 || height > 1'000'000) {
      detail::schema_error(w, "ground_truth.width", "dimensions must be positive");
    }
    t.width = static_cast<int>(width);
    t.height = static_cast<int>(height);
    try {
      t.h = Homography(matrix_from(detail::get_number_array(gt, "H", w, 9)));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::SchemaViolation) throw;
      detail::schema_error(w, "ground_truth.H", "matrix is singular");
    }
    return t;
  }
  if (type == "pose") {
    PoseTruth t;
    t.pose.rotation = matrix_from(detail::get_number_array(gt, "R", w, 9));
    const auto tv = detail::get_number_array(gt, "t", w, 3);
    t.pose.translation = Eigen::Vector3d(tv[0], tv[1], tv[2]);
    if (!t.pose.is_valid(kTruthTolerance)) {
      detail::schema_error(w, "ground_truth.R", "rotation must be orthonormal and t unit length");
    }
    auto it = gt.find("intrinsics");
    if (it == gt.end() || !it->is_object()) detail::schema_error(w, "ground_truth.intrinsics", "missing");
    t.k_ir = parse_intrinsics(detail::require(*it, "ir", w), "ground_truth.intrinsics.ir", w);
    t.k_vis = parse_intrinsics(detail::require(*it, "vis", w), "ground_truth.intrinsics.vis", w);
    return t;
  }
  GeoTruth t;
  t.annotation = detail::get_nonempty_string(gt, "annotation", w);
  std::error_code ec;
  if (options.check_referenced_files && !std::filesystem::is_regular_file(base_dir / t.annotation, ec)) {
    detail::schema_error(w, "ground_truth.annotation", "referenced file '" + t.annotation + "' does not exist");
  }
  return t;
}

PairManifest parse_manifest_record(const json& j, const std::filesystem::path& base_dir,
                                   const ManifestLoadOptions& options, const Where& w) {
  detail::check_schema(j, kManifestSchema, w);
  PairManifest m;
  m.base_dir = base_dir;
  m.pair_id = detail::get_nonempty_string(j, "pair_id", w);
  m.dataset_id = detail::get_string(j, "dataset_id", w);
  const std::string task = detail::get_string(j, "task", w);
  const auto t = task_from_name(task);
  if (!t) detail::schema_error(w, "task", "unknown task '" + task + "'");
  m.task = *t;

  const json& images = require_object(j, "images", w);
  m.ir_image = detail::get_string(images, "ir", w);
  m.vis_image = detail::get_string(images, "vis", w);
  const json& sizes = require_object(j, "sizes", w);
  m.ir_size = parse_size(detail::require(sizes, "ir", w), "sizes.ir", w);
  m.vis_size = parse_size(detail::require(sizes, "vis", w), "sizes.vis", w);

  m.truth = parse_truth(require_object(j, "ground_truth", w), m.task, base_dir, options, w);
  m.scene_id = detail::get_optional_string(j, "scene_id", w);
  m.split_id = detail::get_optional_string(j, "split_id", w);
  m.warped_side = detail::get_optional_string(j, "warped_side", w);
  if (!m.warped_side.empty() && m.warped_side != "ir" && m.warped_side != "vis") {
    detail::schema_error(w, "warped_side", "must be 'ir' or 'vis'");
  }
  if (options.require_images) {
    for (const std::string* p : {&m.ir_image, &m.vis_image}) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(base_dir / *p, ec)) {
        detail::schema_error(w, "images", "image '" + *p + "' does not exist");
      }
    }
  }
  return m;
}

std::array<FrameSize, 2> parse_size_pair(const json& obj, std::string_view name, const Where& w) {
  const json& s = require_object(obj, name, w);
  return {parse_size(detail::require(s, "a", w), std::string(name) + ".a", w),
          parse_size(detail::require(s, "b", w), std::string(name) + ".b", w)};
}

bool within(const Point2& p, const FrameSize& s) {
  return p.x >= -kBoundsSlack && p.y >= -kBoundsSlack && p.x <= s.width + kBoundsSlack &&
         p.y <= s.height + kBoundsSlack;
}

MatchFileRecord parse_match_record(const json& j, std::size_t cap, const Where& w) {
  detail::check_schema(j, kMatchesSchema, w);
  MatchFileRecord r;
  r.pair_id = detail::get_nonempty_string(j, "pair_id", w);
  r.matcher_id = detail::get_nonempty_string(j, "matcher_id", w);
  r.category = detail::get_optional_string(j, "category", w);
  const auto branch = branch_from_code(detail::get_integer(j, "branch", w));
  if (!branch) detail::schema_error(w, "branch", "branch code must be 0-3");
  r.branch = *branch;
  const auto sizes = parse_size_pair(j, "image_sizes", w);
  r.size_a = sizes[0];
  r.size_b = sizes[1];
  const auto matched = parse_size_pair(j, "matched_sizes", w);
  r.matched_size_a = matched[0];
  r.matched_size_b = matched[1];
  r.resize_policy = detail::get_string(j, "resize_policy", w);
  r.status = detail::get_string(j, "status", w);
  if (r.status != "ok" && r.status != "matcher_crashed") {
    detail::schema_error(w, "status", "must be 'ok' or 'matcher_crashed'");
  }
  r.note = detail::get_optional_string(j, "note", w);

  const json& arr = detail::require(j, "matches", w);
  if (!arr.is_array()) detail::schema_error(w, "matches", "expected an array");
  if (arr.size() > cap) {
    throw Error(ErrorCode::CapExceeded, w.prefix() + std::to_string(arr.size()) + " matches exceed the cap of " +
                                            std::to_string(cap));
  }
  r.matches.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& e = arr[i];
    if (!e.is_array() || (e.size() != 4 && e.size() != 5)) {
      detail::schema_error(w, "matches", "entry " + std::to_string(i) + " must be [xa, ya, xb, yb(, conf)]");
    }
    Match m;
    m.a = {detail::as_number(e[0], "matches", w), detail::as_number(e[1], "matches", w)};
    m.b = {detail::as_number(e[2], "matches", w), detail::as_number(e[3], "matches", w)};
    if (e.size() == 5 && !e[4].is_null()) {
      const double c = detail::as_number(e[4], "matches", w);
      if (c < 0.0 || c > 1.0) detail::schema_error(w, "matches", "confidence must lie in [0, 1]");
      m.confidence = c;
    }
    if (!within(m.a, r.size_a) || !within(m.b, r.size_b)) {
      throw Error(ErrorCode::OutOfBounds, w.prefix() + "match " + std::to_string(i) +
                                              " lies outside the declared image bounds");
    }
    r.matches.push_back(m);
  }
  return r;
}

GeoAnnotation parse_geo_record(const json& j, const Where& w) {
  detail::check_schema(j, kGeoAnnotationSchema, w);
  GeoAnnotation a;
  a.pair_id = detail::get_nonempty_string(j, "pair_id", w);
  a.thermal_points = detail::get_points(j, "thermal_points", w);
  a.satellite_points = detail::get_points(j, "satellite_points", w);
  a.meters_per_pixel = detail::get_number(j, "meters_per_pixel", w);
  a.note = detail::get_optional_string(j, "note", w);
  if (a.thermal_points.size() != a.satellite_points.size()) {
    throw Error(ErrorCode::MisalignedLists, w.prefix() + std::to_string(a.thermal_points.size()) +
                                                " thermal points vs " + std::to_string(a.satellite_points.size()) +
                                                " satellite points");
  }
  if (a.thermal_points.empty()) detail::schema_error(w, "thermal_points", "needs at least one point");
  if (!(a.meters_per_pixel > 0.0)) {
    throw Error(ErrorCode::NonPositiveScale, w.prefix() + "meters_per_pixel must be positive");
  }
  return a;
}

std::string_view role_name(SplitRole r) {
  switch (r) {
    case SplitRole::Train: return "train";
    case SplitRole::Validation: return "validation";
    case SplitRole::Test: return "test";
  }
  return "";
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace

std::string_view task_name(Task t) {
  switch (t) {
    case Task::Homography: return "homography";
    case Task::Pose: return "pose";
    case Task::Geo: return "geo";
    case Task::GeoHard: return "geo_hard";
  }
  return "";
}

std::optional<Task> task_from_name(std::string_view name) {
  for (Task t : {Task::Homography, Task::Pose, Task::Geo, Task::GeoHard}) {
    if (task_name(t) == name) return t;
  }
  return std::nullopt;
}

std::filesystem::path resolve(const PairManifest& m, const std::string& relative) {
  const std::filesystem::path p(relative);
  return p.is_absolute() ? p : m.base_dir / p;
}

ManifestSet parse_manifest(std::istream& in, const std::string& source, const std::filesystem::path& base_dir,
                           const ManifestLoadOptions& options) {
  ManifestSet out;
  std::set<std::string> seen;
  std::string line;
  Where w{source, 0};
  while (std::getline(in, line)) {
    ++w.line;
    if (blank(line)) continue;
    PairManifest m = parse_manifest_record(detail::parse_line(line, w), base_dir, options, w);
    if (!seen.insert(m.pair_id).second) {
      throw Error(ErrorCode::DuplicateId, w.prefix() + "duplicate pair_id '" + m.pair_id + "'");
    }
    ++out.summary[m.task];
    out.pairs.push_back(std::move(m));
  }
  return out;
}

ManifestSet load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& options) {
  auto in = open_or_throw(path);
  return parse_manifest(in, path.string(), path.parent_path(), options);
}

json manifest_to_json(const PairManifest& m) {
  json j{{"schema", kManifestSchema},
         {"pair_id", m.pair_id},
         {"dataset_id", m.dataset_id},
         {"task", task_name(m.task)},
         {"images", {{"ir", m.ir_image}, {"vis", m.vis_image}}},
         {"sizes", {{"ir", size_json(m.ir_size)}, {"vis", size_json(m.vis_size)}}}};
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, HomographyTruth>) {
          j["ground_truth"] = {{"type", "homography"},
                               {"seed", t.seed},
                               {"width", t.width},
                               {"height", t.height},
                               {"H", matrix_json(t.h.matrix())}};
        } else if constexpr (std::is_same_v<T, PoseTruth>) {
          j["ground_truth"] = {{"type", "pose"},
                               {"R", matrix_json(t.pose.rotation)},
                               {"t", {t.pose.translation.x(), t.pose.translation.y(), t.pose.translation.z()}},
                               {"intrinsics", {{"ir", intrinsics_json(t.k_ir)}, {"vis", intrinsics_json(t.k_vis)}}}};
        } else {
          j["ground_truth"] = {{"type", "geo"}, {"annotation", t.annotation}};
        }
      },
      m.truth);
  if (!m.scene_id.empty()) j["scene_id"] = m.scene_id;
  if (!m.split_id.empty()) j["split_id"] = m.split_id;
  if (!m.warped_side.empty()) j["warped_side"] = m.warped_side;
  return j;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const json& r : records) out << r.dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_manifest(const std::filesystem::path& path, const std::vector<PairManifest>& pairs) {
  std::vector<json> records;
  records.reserve(pairs.size());
  for (const auto& m : pairs) records.push_back(manifest_to_json(m));
  write_jsonl(path, records);
}

MatchLoadResult parse_matches(std::istream& in, const std::string& source, std::size_t cap) {
  MatchLoadResult out;
  std::set<std::tuple<std::string, std::string, int>> seen;
  std::string line;
  Where w{source, 0};
  while (std::getline(in, line)) {
    ++w.line;
    if (blank(line)) continue;
    std::string pair_id;
    try {
      const json j = detail::parse_line(line, w);
      if (auto it = j.find("pair_id"); it != j.end() && it->is_string()) pair_id = it->get<std::string>();
      MatchFileRecord r = parse_match_record(j, cap, w);
      if (!seen.emplace(r.pair_id, r.matcher_id, branch_code(r.branch)).second) {
        throw Error(ErrorCode::DuplicateId, w.prefix() + "duplicate (pair, matcher, branch) record");
      }
      out.records.push_back(std::move(r));
    } catch (const Error& e) {
      out.quarantine.push_back({source, w.line, pair_id, e.code(), e.what()});
    } catch (const std::exception& e) {
      out.quarantine.push_back({source, w.line, pair_id, ErrorCode::ParseError, e.what()});
    }
  }
  return out;
}

MatchLoadResult load_matches(const std::filesystem::path& path, std::size_t cap) {
  auto in = open_or_throw(path);
  return parse_matches(in, path.string(), cap);
}

MatchLoadResult load_matches_dir(const std::filesystem::path& dir, std::size_t cap) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  MatchLoadResult out;
  for (const auto& f : files) {
    MatchLoadResult part = load_matches(f, cap);
    std::move(part.records.begin(), part.records.end(), std::back_inserter(out.records));
    std::move(part.quarantine.begin(), part.quarantine.end(), std::back_inserter(out.quarantine));
  }
  return out;
}

json match_record_to_json(const MatchFileRecord& r) {
  json matches = json::array();
  for (const Match& m : r.matches) {
    json e = json::array({m.a.x, m.a.y, m.b.x, m.b.y});
    if (m.confidence) e.push_back(*m.confidence);
    matches.push_back(std::move(e));
  }
  json j{{"schema", kMatchesSchema},
         {"pair_id", r.pair_id},
         {"matcher_id", r.matcher_id},
         {"branch", branch_code(r.branch)},
         {"image_sizes", {{"a", size_json(r.size_a)}, {"b", size_json(r.size_b)}}},
         {"matched_sizes", {{"a", size_json(r.matched_size_a)}, {"b", size_json(r.matched_size_b)}}},
         {"resize_policy", r.resize_policy},
         {"status", r.status},
         {"matches", std::move(matches)}};
  if (!r.category.empty()) j["category"] = r.category;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

void write_matches(const std::filesystem::path& path, const std::vector<MatchFileRecord>& records) {
  std::vector<json> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(match_record_to_json(r));
  write_jsonl(path, out);
}

GeoAnnotation parse_geo_annotation(std::istream& in, const std::string& source) {
  std::optional<GeoAnnotation> out;
  std::string line;
  Where w{source, 0};
  while (std::getline(in, line)) {
    ++w.line;
    if (blank(line)) continue;
    if (out) detail::schema_error(w, "schema", "an annotation file holds exactly one record");
    out = parse_geo_record(detail::parse_line(line, w), w);
  }
  if (!out) throw Error(ErrorCode::SchemaViolation, source + ": annotation file has no record");
  return *out;
}

GeoAnnotation load_geo_annotation(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_geo_annotation(in, path.string());
}

json geo_annotation_to_json(const GeoAnnotation& a) {
  json j{{"schema", kGeoAnnotationSchema},
         {"pair_id", a.pair_id},
         {"thermal_points", detail::points_to_json(a.thermal_points)},
         {"satellite_points", detail::points_to_json(a.satellite_points)},
         {"meters_per_pixel", a.meters_per_pixel}};
  if (!a.note.empty()) j["note"] = a.note;
  return j;
}

void write_geo_annotation(const std::filesystem::path& path, const GeoAnnotation& a) {
  write_jsonl(path, {geo_annotation_to_json(a)});
}

std::vector<DatasetSplit> parse_splits(std::istream& in, const std::string& source) {
  std::vector<DatasetSplit> out;
  std::string line;
  Where w{source, 0};
  while (std::getline(in, line)) {
    ++w.line;
    if (blank(line)) continue;
    const json j = detail::parse_line(line, w);
    detail::check_schema(j, kSplitSchema, w);
    DatasetSplit s;
    s.name = detail::get_nonempty_string(j, "name", w);
    const std::string role = detail::get_string(j, "role", w);
    if (role == "train") {
      s.role = SplitRole::Train;
    } else if (role == "validation") {
      s.role = SplitRole::Validation;
    } else if (role == "test") {
      s.role = SplitRole::Test;
    } else {
      detail::schema_error(w, "role", "must be train, validation or test");
    }
    const json& ids = detail::require(j, "pair_ids", w);
    if (!ids.is_array()) detail::schema_error(w, "pair_ids", "expected an array of strings");
    for (const json& id : ids) {
      if (!id.is_string()) detail::schema_error(w, "pair_ids", "expected an array of strings");
      s.pair_ids.push_back(id.get<std::string>());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<DatasetSplit> load_splits(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_splits(in, path.string());
}

json split_to_json(const DatasetSplit& s) {
  return {{"schema", kSplitSchema}, {"name", s.name}, {"role", role_name(s.role)}, {"pair_ids", s.pair_ids}};
}

void check_sequence_disjoint(const std::vector<DatasetSplit>& splits, const std::vector<PairManifest>& pairs) {
  std::map<std::string, std::string> scene_of;
  for (const PairManifest& m : pairs) scene_of[m.pair_id] = m.scene_id.empty() ? m.pair_id : m.scene_id;
  std::map<std::string, SplitRole> role_of_scene;
  for (const DatasetSplit& s : splits) {
    for (const std::string& id : s.pair_ids) {
      auto it = scene_of.find(id);
      if (it == scene_of.end()) {
        throw Error(ErrorCode::SchemaViolation, "split '" + s.name + "' names unknown pair '" + id + "'");
      }
      auto [r, inserted] = role_of_scene.emplace(it->second, s.role);
      if (!inserted && r->second != s.role) {
        throw Error(ErrorCode::ConflictingTag, "scene '" + it->second + "' appears in both " +
                                                   std::string(role_name(r->second)) + " and " +
                                                   std::string(role_name(s.role)) + " splits");
      }
    }
  }
}

}  // namespace cmbench
