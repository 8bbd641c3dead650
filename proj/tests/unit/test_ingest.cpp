#include <doctest.h>

#include <random>
#include <sstream>

#include "../support/fuzz.hpp"
#include "../support/golden.hpp"
#include "../support/oracles.hpp"
#include "cmbench/error.hpp"
#include "cmbench/ingest.hpp"
#include "cmbench/synth.hpp"

using namespace cmbench;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

ManifestSet parse_text(const std::string& text, ManifestLoadOptions opt = {}) {
  std::istringstream in(text);
  return parse_manifest(in, "<test>", ".", opt);
}

MatchLoadResult parse_match_text(const std::string& text, std::size_t cap = kDefaultMatchCap) {
  std::istringstream in(text);
  return parse_matches(in, "<test>", cap);
}

std::string random_id(std::mt19937_64& rng) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789-_./ é";
  std::string s;
  const std::size_t n = 1 + rng() % 12;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % (alphabet.size() - 2)];
  return s;
}

PairManifest random_manifest(std::size_t i, std::mt19937_64& rng) {
  PairManifest m;
  m.pair_id = "pair-" + std::to_string(i) + "-" + random_id(rng);
  m.dataset_id = random_id(rng);
  m.ir_image = random_id(rng) + ".png";
  m.vis_image = random_id(rng) + ".png";
  m.ir_size = {static_cast<int>(1 + rng() % 4000), static_cast<int>(1 + rng() % 4000)};
  m.vis_size = {static_cast<int>(1 + rng() % 4000), static_cast<int>(1 + rng() % 4000)};
  if (rng() % 2) m.scene_id = random_id(rng);
  if (rng() % 2) m.split_id = random_id(rng);
  switch (rng() % 4) {
    case 0: {
      m.task = Task::Homography;
      HomographyTruth t;
      t.seed = rng();
      t.width = 640;
      t.height = 480;
      t.h = sample_homography(t.seed, 640, 480).ground_truth;
      m.truth = t;
      m.warped_side = rng() % 2 ? "vis" : "ir";
      break;
    }
    case 1: {
      m.task = Task::Pose;
      PoseTruth t;
      t.pose.rotation = oracle::axis_rotation({oracle::uni(rng, -1, 1), oracle::uni(rng, -1, 1), 1.0},
                                              oracle::uni(rng, -60, 60));
      t.pose.translation = Eigen::Vector3d(oracle::uni(rng, -1, 1), oracle::uni(rng, -1, 1), 0.5).normalized();
      t.k_ir = {oracle::uni(rng, 100, 2000), oracle::uni(rng, 100, 2000), oracle::uni(rng, 0, 640),
                oracle::uni(rng, 0, 480)};
      t.k_vis = {oracle::uni(rng, 100, 2000), oracle::uni(rng, 100, 2000), oracle::uni(rng, 0, 640),
                 oracle::uni(rng, 0, 480)};
      m.truth = t;
      break;
    }
    default:
      m.task = rng() % 2 ? Task::Geo : Task::GeoHard;
      m.truth = GeoTruth{"annotations/" + random_id(rng) + ".jsonl"};
      break;
  }
  return m;
}

const std::string kManifestLine =
    R"({"schema":"cmbench.manifest/1","pair_id":"x","dataset_id":"d","task":"homography",)"
    R"("images":{"ir":"a.png","vis":"b.png"},"sizes":{"ir":[64,48],"vis":[64,48]},)"
    R"("ground_truth":{"type":"homography","seed":1,"width":64,"height":48,"H":[1,0,0,0,1,0,0,0,1]}})";

std::string match_line(const std::string& pair, int n, double x = 5.0) {
  nlohmann::json matches = nlohmann::json::array();
  for (int i = 0; i < n; ++i) matches.push_back({x, 5.0, 6.0, 7.0, 0.5});
  nlohmann::json j{{"schema", "cmbench.matches/1"},
                   {"pair_id", pair},
                   {"matcher_id", "m"},
                   {"branch", 0},
                   {"image_sizes", {{"a", {64, 48}}, {"b", {64, 48}}}},
                   {"matched_sizes", {{"a", {64, 48}}, {"b", {64, 48}}}},
                   {"resize_policy", "none"},
                   {"status", "ok"},
                   {"matches", matches}};
  return j.dump();
}

}  // namespace

TEST_CASE("manifest: empty input and basic validation") {
  const auto empty = parse_text("");
  CHECK(empty.pairs.empty());
  CHECK(empty.summary.empty());
  CHECK(parse_text("\n  \n").pairs.empty());

  const auto one = parse_text(kManifestLine);
  REQUIRE(one.pairs.size() == 1);
  CHECK(one.summary.at(Task::Homography) == 1);

  std::string variant = kManifestLine;
  variant.replace(variant.find(R"("task":"homography")"), 19, R"("task":"pose")");
  CHECK(code_of([&] { parse_text(variant); }) == ErrorCode::SchemaViolation);
  try {
    parse_text("\n" + variant);
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("<test>:2") != std::string::npos);
    CHECK(msg.find("ground_truth.type") != std::string::npos);
  }
  CHECK(code_of([&] { parse_text(kManifestLine + "\n" + kManifestLine); }) == ErrorCode::DuplicateId);
  CHECK(code_of([&] { parse_text("{oops"); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { parse_text("[1,2]"); }) == ErrorCode::ParseError);

  std::string singular = kManifestLine;
  singular.replace(singular.find("[1,0,0,0,1,0,0,0,1]"), 19, "[1,2,3,2,4,6,0,0,1]");
  CHECK(code_of([&] { parse_text(singular); }) == ErrorCode::SchemaViolation);

  std::string schema = kManifestLine;
  schema.replace(schema.find("manifest/1"), 10, "manifest/9");
  CHECK(code_of([&] { parse_text(schema); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("manifest: referenced files") {
  const std::string geo =
      R"({"schema":"cmbench.manifest/1","pair_id":"g","dataset_id":"d","task":"geo",)"
      R"("images":{"ir":"a.png","vis":"b.png"},"sizes":{"ir":[64,48],"vis":[64,48]},)"
      R"("ground_truth":{"type":"geo","annotation":"definitely/missing.jsonl"}})";
  CHECK(code_of([&] { parse_text(geo); }) == ErrorCode::SchemaViolation);
  ManifestLoadOptions lax;
  lax.check_referenced_files = false;
  CHECK(parse_text(geo, lax).pairs.size() == 1);
  ManifestLoadOptions strict;
  strict.require_images = true;
  CHECK(code_of([&] { parse_text(kManifestLine, strict); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("manifest: 500 generated records round-trip") {
  std::mt19937_64 rng(11);
  std::vector<PairManifest> pairs;
  for (std::size_t i = 0; i < 500; ++i) pairs.push_back(random_manifest(i, rng));
  const auto dir = std::filesystem::temp_directory_path() / "cmbench-manifest-rt";
  std::filesystem::create_directories(dir);
  write_manifest(dir / "m.jsonl", pairs);
  ManifestLoadOptions opt;
  opt.check_referenced_files = false;
  const auto back = load_manifest(dir / "m.jsonl", opt);
  REQUIRE(back.pairs.size() == pairs.size());
  std::size_t total = 0;
  for (const auto& [task, n] : back.summary) total += n;
  CHECK(total == 500);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(manifest_to_json(back.pairs[i]) == manifest_to_json(pairs[i]));
    CHECK(back.pairs[i].task == pairs[i].task);
    CHECK(back.pairs[i].truth.index() == pairs[i].truth.index());
    CHECK(back.pairs[i].base_dir == dir);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("matches: cap, bounds and quarantine") {
  const auto ok = parse_match_text(match_line("a", 3) + "\n" + match_line("b", 0) + "\n" + match_line("c", 2048));
  CHECK(ok.records.size() == 3);
  CHECK(ok.quarantine.empty());
  CHECK(ok.records[0].matches.size() == 3);
  CHECK(ok.records[0].matches[0].confidence == 0.5);

  const auto capped = parse_match_text(match_line("a", 2049) + "\n" + match_line("b", 2));
  CHECK(capped.records.size() == 1);
  REQUIRE(capped.quarantine.size() == 1);
  CHECK(capped.quarantine[0].code == ErrorCode::CapExceeded);
  CHECK(capped.quarantine[0].line == 1);
  CHECK(capped.quarantine[0].pair_id == "a");
  CHECK(parse_match_text(match_line("a", 10), 5).quarantine[0].code == ErrorCode::CapExceeded);

  // 1 px of slack on every side
  CHECK(parse_match_text(match_line("a", 1, 64.9)).quarantine.empty());
  CHECK(parse_match_text(match_line("a", 1, -0.9)).quarantine.empty());
  const auto outside = parse_match_text(match_line("a", 1, 65.5));
  REQUIRE(outside.quarantine.size() == 1);
  CHECK(outside.quarantine[0].code == ErrorCode::OutOfBounds);

  auto j = nlohmann::json::parse(match_line("a", 1));
  j["branch"] = 4;
  CHECK(parse_match_text(j.dump()).quarantine[0].code == ErrorCode::SchemaViolation);
  j["branch"] = 0;
  j["matches"][0][4] = 1.5;
  CHECK(parse_match_text(j.dump()).quarantine[0].code == ErrorCode::SchemaViolation);
  j["matches"][0] = {1, 2, 3};
  CHECK(parse_match_text(j.dump()).quarantine[0].code == ErrorCode::SchemaViolation);

  const auto dup = parse_match_text(match_line("a", 1) + "\n" + match_line("a", 2));
  CHECK(dup.records.size() == 1);
  CHECK(dup.quarantine[0].code == ErrorCode::DuplicateId);
  CHECK(parse_match_text("not json\n" + match_line("a", 1)).quarantine[0].code == ErrorCode::ParseError);
}

TEST_CASE("matches: records round-trip") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 50; ++i) {
    MatchFileRecord r;
    r.pair_id = random_id(rng);
    r.matcher_id = random_id(rng);
    r.category = i % 3 ? "dense" : "";
    r.branch = static_cast<BranchId>(rng() % 4);
    r.size_a = r.matched_size_a = {640, 480};
    r.size_b = r.matched_size_b = {1024, 768};
    r.resize_policy = "max-dim-640";
    r.note = i % 2 ? "n" : "";
    for (int k = 0; k < 20; ++k) {
      Match m;
      m.a = {oracle::uni(rng, 0, 640), oracle::uni(rng, 0, 480)};
      m.b = {oracle::uni(rng, 0, 1024), oracle::uni(rng, 0, 768)};
      if (k % 2) m.confidence = oracle::uni(rng, 0, 1);
      r.matches.push_back(m);
    }
    const auto back = parse_match_text(match_record_to_json(r).dump());
    REQUIRE(back.records.size() == 1);
    CHECK(match_record_to_json(back.records[0]) == match_record_to_json(r));
  }
}

TEST_CASE("geo annotations") {
  GeoAnnotation a;
  a.pair_id = "g";
  a.thermal_points = {{1, 2}};
  a.satellite_points = {{3, 4}};
  a.meters_per_pixel = 0.5;
  std::istringstream one(geo_annotation_to_json(a).dump());
  CHECK(parse_geo_annotation(one, "<t>") == a);

  auto j = geo_annotation_to_json(a);
  j["thermal_points"] = {{1, 2}, {3, 4}, {5, 6}};
  j["satellite_points"] = {{1, 2}, {3, 4}};
  std::istringstream misaligned(j.dump());
  CHECK(code_of([&] { parse_geo_annotation(misaligned, "<t>"); }) == ErrorCode::MisalignedLists);
  j = geo_annotation_to_json(a);
  j["meters_per_pixel"] = 0.0;
  std::istringstream zero(j.dump());
  CHECK(code_of([&] { parse_geo_annotation(zero, "<t>"); }) == ErrorCode::NonPositiveScale);
  std::istringstream empty("");
  CHECK(code_of([&] { parse_geo_annotation(empty, "<t>"); }) == ErrorCode::SchemaViolation);
  std::istringstream two(geo_annotation_to_json(a).dump() + "\n" + geo_annotation_to_json(a).dump());
  CHECK(code_of([&] { parse_geo_annotation(two, "<t>"); }) == ErrorCode::SchemaViolation);

  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    GeoAnnotation g;
    g.pair_id = random_id(rng);
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int k = 0; k < n; ++k) {
      g.thermal_points.push_back({oracle::uni(rng, -10, 700), oracle::uni(rng, -10, 700)});
      g.satellite_points.push_back({oracle::uni(rng, 0, 2000), oracle::uni(rng, 0, 2000)});
    }
    g.meters_per_pixel = oracle::uni(rng, 0.01, 5);
    if (i % 2) g.note = random_id(rng);
    std::istringstream in(geo_annotation_to_json(g).dump() + "\n");
    CHECK(parse_geo_annotation(in, "<t>") == g);
  }
}

TEST_CASE("splits and sequence disjointness") {
  std::vector<PairManifest> pairs(4);
  for (int i = 0; i < 4; ++i) pairs[i].pair_id = "p" + std::to_string(i);
  pairs[0].scene_id = pairs[1].scene_id = "s1";
  pairs[2].scene_id = "s2";
  const DatasetSplit train{"tr", SplitRole::Train, {"p0", "p1"}};
  const DatasetSplit test{"te", SplitRole::Test, {"p2", "p3"}};
  CHECK_NOTHROW(check_sequence_disjoint({train, test}, pairs));
  const DatasetSplit leak{"te", SplitRole::Test, {"p1"}};
  CHECK(code_of([&] { check_sequence_disjoint({train, leak}, pairs); }) == ErrorCode::ConflictingTag);
  const DatasetSplit unknown{"te", SplitRole::Test, {"p9"}};
  CHECK(code_of([&] { check_sequence_disjoint({unknown}, pairs); }) == ErrorCode::SchemaViolation);

  std::istringstream in(split_to_json(train).dump() + "\n" + split_to_json(test).dump() + "\n");
  CHECK(parse_splits(in, "<t>") == std::vector<DatasetSplit>{train, test});
  std::istringstream bad(R"({"schema":"cmbench.split/1","name":"x","role":"holdout","pair_ids":[]})");
  CHECK(code_of([&] { parse_splits(bad, "<t>"); }) == ErrorCode::SchemaViolation);
}

TEST_CASE("golden files round-trip byte-identically") {
  for (const auto& rt : golden::round_trips()) {
    INFO(rt.name);
    CHECK(!rt.original.empty());
    CHECK(rt.rewritten == rt.original);
  }
  const auto splits = load_splits(golden::dir() / "splits.jsonl");
  CHECK_NOTHROW(check_sequence_disjoint(splits, load_manifest(golden::dir() / "manifest.jsonl").pairs));
}

TEST_CASE("loaders are total under byte mutations") {
  const std::pair<fuzz::Loader, std::string> seeds[] = {
      {fuzz::Loader::Manifest, golden::read_bytes(golden::dir() / "manifest.jsonl")},
      {fuzz::Loader::Matches, golden::read_bytes(golden::dir() / "matches.jsonl")},
      {fuzz::Loader::GeoAnnotation, golden::read_bytes(golden::dir() / "annotation.jsonl")},
  };
  std::uint64_t s = 0;
  for (const auto& [loader, seed] : seeds) {
    const auto out = fuzz::run(loader, seed, 3000, ++s);
    CHECK(out.untyped == 0);
    CHECK(out.inputs == 3000);
    CHECK(out.accepted + out.typed_errors + out.quarantined == out.inputs);
  }
}
