#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cmbench/error.hpp"
#include "cmbench/geometry.hpp"
#include "cmbench/metrics.hpp"
#include "cmbench/preprocess.hpp"
#include "cmbench/synth.hpp"

namespace cmbench {

inline constexpr std::string_view kManifestSchema = "cmbench.manifest/1";
inline constexpr std::string_view kMatchesSchema = "cmbench.matches/1";
inline constexpr std::string_view kGeoAnnotationSchema = "cmbench.geo-annotation/1";
inline constexpr std::string_view kSplitSchema = "cmbench.split/1";

enum class Task { Homography, Pose, Geo, GeoHard };

std::string_view task_name(Task t);
std::optional<Task> task_from_name(std::string_view name);

/// Synthetic homography mapping image A (infrared) pixels to image B pixels.
struct HomographyTruth {
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  Homography h;
};

/// Camera B = R * camera A + t, with per-image intrinsics.
struct PoseTruth {
  RelativePose pose;
  CameraIntrinsics k_ir;
  CameraIntrinsics k_vis;
};

/// Reference to a geo annotation file, relative to the manifest directory.
struct GeoTruth {
  std::string annotation;
};

using GroundTruth = std::variant<HomographyTruth, PoseTruth, GeoTruth>;

struct PairManifest {
  std::string pair_id;
  std::string dataset_id;
  Task task = Task::Homography;
  std::string ir_image;
  std::string vis_image;
  FrameSize ir_size;
  FrameSize vis_size;
  GroundTruth truth;
  std::string scene_id;
  std::string split_id;
  std::string warped_side;  // homography task only: which image the transform was applied to

  /// Directory the manifest was loaded from; relative paths resolve against it.
  std::filesystem::path base_dir;
};

struct ManifestLoadOptions {
  bool check_referenced_files = true;  // geo annotation references
  bool require_images = false;         // image paths
};

struct ManifestSet {
  std::vector<PairManifest> pairs;
  std::map<Task, std::size_t> summary;
};

/// Throws ParseError (with line), SchemaViolation (with field) or DuplicateId.
ManifestSet parse_manifest(std::istream& in, const std::string& source, const std::filesystem::path& base_dir,
                           const ManifestLoadOptions& options = {});
ManifestSet load_manifest(const std::filesystem::path& path, const ManifestLoadOptions& options = {});

nlohmann::json manifest_to_json(const PairManifest& m);
void write_manifest(const std::filesystem::path& path, const std::vector<PairManifest>& pairs);

std::filesystem::path resolve(const PairManifest& m, const std::string& relative);

// ---------------------------------------------------------------------------

struct MatchFileRecord {
  std::string pair_id;
  std::string matcher_id;
  std::string category;  // sparse | semi-dense | dense, empty when unknown
  BranchId branch = BranchId::None;
  FrameSize size_a;        // original resolution; coordinates live here
  FrameSize size_b;
  FrameSize matched_size_a;  // resolution the matcher actually saw
  FrameSize matched_size_b;
  std::string resize_policy;
  std::string status = "ok";
  std::string note;
  MatchSet matches;
};

struct Quarantined {
  std::string source;
  std::size_t line = 0;
  std::string pair_id;
  ErrorCode code = ErrorCode::ParseError;
  std::string message;
};

struct MatchLoadResult {
  std::vector<MatchFileRecord> records;
  std::vector<Quarantined> quarantine;
};

/// Per-record validation; bad records are quarantined rather than thrown.
MatchLoadResult parse_matches(std::istream& in, const std::string& source, std::size_t cap = kDefaultMatchCap);
/// Throws IoError only when the file cannot be opened.
MatchLoadResult load_matches(const std::filesystem::path& path, std::size_t cap = kDefaultMatchCap);
/// Every *.jsonl file in the directory, in file-name order.
MatchLoadResult load_matches_dir(const std::filesystem::path& dir, std::size_t cap = kDefaultMatchCap);

nlohmann::json match_record_to_json(const MatchFileRecord& r);
void write_matches(const std::filesystem::path& path, const std::vector<MatchFileRecord>& records);

// ---------------------------------------------------------------------------

/// Throws ParseError, SchemaViolation, MisalignedLists, NonPositiveScale.
GeoAnnotation parse_geo_annotation(std::istream& in, const std::string& source);
GeoAnnotation load_geo_annotation(const std::filesystem::path& path);
nlohmann::json geo_annotation_to_json(const GeoAnnotation& a);
void write_geo_annotation(const std::filesystem::path& path, const GeoAnnotation& a);

// ---------------------------------------------------------------------------

enum class SplitRole { Train, Validation, Test };

struct DatasetSplit {
  std::string name;
  SplitRole role = SplitRole::Train;
  std::vector<std::string> pair_ids;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

std::vector<DatasetSplit> parse_splits(std::istream& in, const std::string& source);
std::vector<DatasetSplit> load_splits(const std::filesystem::path& path);
nlohmann::json split_to_json(const DatasetSplit& s);

/// Throws ConflictingTag when a scene appears under two roles, and
/// SchemaViolation for pair ids absent from the manifest.
void check_sequence_disjoint(const std::vector<DatasetSplit>& splits, const std::vector<PairManifest>& pairs);

/// Writes one compact JSON document per line.
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

}  // namespace cmbench
