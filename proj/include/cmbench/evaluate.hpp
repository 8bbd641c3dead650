#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cmbench/estimate.hpp"
#include "cmbench/ingest.hpp"
#include "cmbench/metrics.hpp"
#include "cmbench/preprocess.hpp"

namespace cmbench {

struct EvalSettings {
  RansacConfig ransac;
  int resize_max = 640;  // 0 disables the evaluation-time rescale
  std::size_t max_matches = kDefaultMatchCap;
  BranchId branch = BranchId::None;
  BranchParams preprocess;
  int workers = 1;
};

/// Scale factor that brings the longer side to resize_max (1 when disabled).
double eval_scale(const FrameSize& size, int resize_max);

/// Per-pair RANSAC seed: cfg.seed mixed with a hash of the pair id, so the
/// result never depends on evaluation order or worker count.
std::uint64_t pair_seed(std::uint64_t base, const std::string& pair_id);

/// Matches rescaled from original to evaluation resolution.
MatchSet scale_matches(const MatchSet& matches, double scale_a, double scale_b);

/// All evaluators return Failed (never throw) for missing or unusable records.
PairError evaluate_homography_pair(const PairManifest& pair, const MatchFileRecord* record, const EvalSettings& s);
PairError evaluate_pose_pair(const PairManifest& pair, const MatchFileRecord* record, const EvalSettings& s);
PairError evaluate_geo_pair(const PairManifest& pair, const GeoAnnotation& annotation, const MatchFileRecord* record,
                            const EvalSettings& s);

/// Homography RANSAC on a record at evaluation resolution.
HomographyEstimate verify_matches(const PairManifest& pair, const MatchFileRecord& record, const EvalSettings& s);

/// Runs fn(i) for i in [0, n) on `workers` threads; each index is visited once.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Index of match records by (pair, matcher, branch).
class MatchIndex {
 public:
  explicit MatchIndex(std::vector<MatchFileRecord> records);

  const MatchFileRecord* find(const std::string& pair_id, const std::string& matcher_id, BranchId branch) const;
  std::vector<std::string> matchers() const;
  std::string category(const std::string& matcher_id) const;

 private:
  std::vector<MatchFileRecord> records_;
  std::map<std::tuple<std::string, std::string, int>, std::size_t> index_;
};

}  // namespace cmbench
