#include <fstream>

#include "cmbench/error.hpp"
#include "cmbench/gate.hpp"
#include "json_util.hpp"

namespace cmbench {

std::size_t argmax_lowest(const double* values, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

OracleLabel label_from_counts(const std::array<std::size_t, kBranchCount>& counts,
                              const std::array<Status, kBranchCount>& statuses) {
  OracleLabel out;
  out.inlier_counts = counts;
  out.statuses = statuses;
  std::optional<std::size_t> best;
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    if (statuses[b] != Status::Success) continue;
    if (!best || counts[b] > counts[*best]) best = b;
  }
  if (!best) throw Error(ErrorCode::AllBranchesFailed, "every preprocessing branch failed RANSAC");
  out.label = static_cast<BranchId>(*best);
  return out;
}

OracleLabel oracle_label(const std::array<MatchSet, kBranchCount>& branch_matches, const RansacConfig& cfg) {
  std::array<std::size_t, kBranchCount> counts{};
  std::array<Status, kBranchCount> statuses{};
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    const HomographyEstimate est = ransac_homography(branch_matches[b], cfg);
    statuses[b] = est.status;
    counts[b] = est.ok() ? est.inlier_count : 0;
  }
  return label_from_counts(counts, statuses);
}

nlohmann::json sample_to_json(const GateSample& s) {
  return {{"schema", kGateSampleSchema},
          {"pair_id", s.pair_id},
          {"matcher_id", s.matcher_id},
          {"provider", s.provider},
          {"label", branch_code(s.label)},
          {"tie_rule", "lowest-branch-code"},
          {"inlier_counts", s.inlier_counts},
          {"descriptor", s.descriptor}};
}

namespace {

GateSample sample_from_json_at(const nlohmann::json& j, const detail::Where& w) {
  detail::check_schema(j, kGateSampleSchema, w);
  GateSample s;
  s.pair_id = detail::get_nonempty_string(j, "pair_id", w);
  s.matcher_id = detail::get_string(j, "matcher_id", w);
  s.provider = detail::get_nonempty_string(j, "provider", w);
  const auto label = branch_from_code(detail::get_integer(j, "label", w));
  if (!label) detail::schema_error(w, "label", "branch code must be 0-3");
  s.label = *label;
  const auto& counts = detail::require(j, "inlier_counts", w);
  if (!counts.is_array() || counts.size() != kBranchCount) detail::schema_error(w, "inlier_counts", "expected 4 counts");
  for (std::size_t b = 0; b < kBranchCount; ++b) {
    const auto& c = counts[b];
    if (!c.is_number_integer() || (!c.is_number_unsigned() && c.get<std::int64_t>() < 0)) {
      detail::schema_error(w, "inlier_counts", "expected non-negative integers");
    }
    s.inlier_counts[b] = c.is_number_unsigned() ? c.get<std::size_t>() : static_cast<std::size_t>(c.get<std::int64_t>());
  }
  s.descriptor = detail::get_number_array(j, "descriptor", w);
  if (s.descriptor.empty() || s.descriptor.size() % 4 != 0) {
    detail::schema_error(w, "descriptor", "length must be a positive multiple of 4");
  }
  return s;
}

}  // namespace

GateSample sample_from_json(const nlohmann::json& j) { return sample_from_json_at(j, {"<json>", 1}); }

std::vector<GateSample> load_gate_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open sample file " + path.string());
  std::vector<GateSample> out;
  std::string line;
  detail::Where w{path.string(), 0};
  while (std::getline(in, line)) {
    ++w.line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(sample_from_json_at(detail::parse_line(line, w), w));
  }
  return out;
}

}  // namespace cmbench
