#include <doctest.h>

#include <random>
#include <sstream>

#include "cmbench/error.hpp"
#include "cmbench/report.hpp"

using namespace cmbench;

namespace {

ReportRow row(const std::string& matcher, const std::string& category, std::optional<double> auc5,
              const std::string& fp = "fp") {
  ReportRow r;
  r.matcher_id = matcher;
  r.category = category;
  r.task = "homography";
  r.n_pairs = 10;
  r.success_rate = 0.5;
  r.metrics = {{"auc@5", auc5}, {"auc@10", 0.75}, {"auc@20", 0.875}};
  r.fingerprint = fp;
  return r;
}

std::vector<std::string> ids(const std::vector<ReportRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) out.push_back(r.matcher_id);
  return out;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.5) == "0.500000");
  CHECK(format_number(-0.0) == "0.000000");
  CHECK(format_number(1.0 / 3.0) == "0.333333");
  CHECK(threshold_column("auc", 5) == "auc@5");
  CHECK(threshold_column("sr", 3, "m") == "sr@3m");
  CHECK(threshold_column("auc", 2.5) == "auc@2.5");
}

TEST_CASE("fingerprint covers every setting") {
  EvalSettings s;
  const std::string base = config_fingerprint(s);
  CHECK(base ==
        "ransac:thr=3;iters=2000;conf=0.9999;seed=0|resize=640|cap=2048|branch=none|"
        "pre:sigma=1.5;amount=1;lcn=15;eps=1;order=normalize-rescale;morph=1");
  CHECK(base.find(',') == std::string::npos);
  auto changed = [&](auto&& edit) {
    EvalSettings t;
    edit(t);
    return config_fingerprint(t) != base;
  };
  CHECK(changed([](EvalSettings& t) { t.ransac.threshold = 2.5; }));
  CHECK(changed([](EvalSettings& t) { t.ransac.max_iterations = 100; }));
  CHECK(changed([](EvalSettings& t) { t.ransac.confidence = 0.99; }));
  CHECK(changed([](EvalSettings& t) { t.ransac.seed = 1; }));
  CHECK(changed([](EvalSettings& t) { t.resize_max = 0; }));
  CHECK(changed([](EvalSettings& t) { t.max_matches = 10; }));
  CHECK(changed([](EvalSettings& t) { t.branch = BranchId::MorphGradient; }));
  CHECK(changed([](EvalSettings& t) { t.preprocess.unsharp_sigma = 2.0; }));
  CHECK(changed([](EvalSettings& t) { t.preprocess.lcn_window = 5; }));
  CHECK(changed([](EvalSettings& t) { t.preprocess.morph_radius = 2; }));
  CHECK_FALSE(changed([](EvalSettings& t) { t.workers = 8; }));
}

TEST_CASE("rows sort by category, then primary metric, then id") {
  std::vector<ReportRow> rows = {row("b", "dense", 0.5),  row("a", "sparse", 0.25), row("c", "sparse", 0.75),
                                 row("d", "semi-dense", 0.1), row("e", "sparse", std::nullopt),
                                 row("f", "other", 0.9), row("g", "sparse", 0.75)};
  sort_rows(rows);
  CHECK(ids(rows) == std::vector<std::string>{"c", "g", "a", "e", "d", "b", "f"});
}

TEST_CASE("csv and json round-trip") {
  std::mt19937_64 rng(1);
  std::vector<ReportRow> rows;
  for (int i = 0; i < 40; ++i) {
    ReportRow r = row("m" + std::to_string(i), i % 2 ? "sparse" : "dense", static_cast<double>(rng() % 65) / 64.0);
    r.success_rate = static_cast<double>(rng() % 65) / 64.0;
    if (i % 5 == 0) r.metrics[1].value.reset();
    rows.push_back(r);
  }
  for (ReportFormat f : {ReportFormat::Csv, ReportFormat::Json}) {
    std::stringstream s;
    write_report(s, rows, f);
    const auto back = f == ReportFormat::Csv ? read_csv(s, "<t>") : read_json(s, "<t>");
    CHECK(back == rows);
  }
  std::ostringstream csv;
  write_csv(csv, {row("x", "sparse", std::nullopt)});
  CHECK(csv.str() ==
        "matcher_id,category,task,n_pairs,success_rate,auc@5,auc@10,auc@20,fingerprint\n"
        "x,sparse,homography,10,0.500000,—,0.750000,0.875000,fp\n");

  ReportRow bad = row("a,b", "sparse", 0.5);
  std::ostringstream sink;
  CHECK_THROWS_AS(write_csv(sink, {bad}), Error);
  std::istringstream wrong("matcher,x\n");
  CHECK_THROWS_AS(read_csv(wrong, "<t>"), Error);
}

TEST_CASE("merging checks columns and fingerprints") {
  CHECK_NOTHROW(check_compatible({row("a", "sparse", 0.5), row("b", "dense", 0.1)}, false));
  try {
    check_compatible({row("a", "sparse", 0.5), row("b", "dense", 0.1, "other")}, false);
    FAIL("expected FingerprintMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FingerprintMismatch);
  }
  CHECK_NOTHROW(check_compatible({row("a", "sparse", 0.5), row("b", "dense", 0.1, "other")}, true));
  ReportRow geo = row("g", "sparse", 0.5);
  geo.metrics = {{"mederr_m", 1.0}};
  CHECK_THROWS_AS(check_compatible({row("a", "sparse", 0.5), geo}, true), Error);
}

TEST_CASE("text table") {
  std::ostringstream out;
  write_text_table(out, {row("superpoint", "sparse", 0.5), row("x", "dense", std::nullopt)});
  const std::string t = out.str();
  CHECK(t.find("superpoint") != std::string::npos);
  CHECK(t.find("config: fp") != std::string::npos);
  CHECK(t.find("—") != std::string::npos);
}
