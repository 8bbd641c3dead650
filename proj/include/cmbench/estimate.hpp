#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cmbench/geometry.hpp"

namespace cmbench {

struct RansacConfig {
  double threshold = 3.0;  // pixels
  int max_iterations = 2000;
  double confidence = 0.9999;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument unless threshold > 0, 0 < confidence < 1, max_iterations >= 1.
  void validate() const;
};

enum class Status { Success, Failed };

/// Failed results never carry a model; the mask is always aligned with the
/// input matches (all false on failure).
template <typename Model>
struct EstimationResult {
  std::optional<Model> model;
  std::vector<bool> inlier_mask;
  std::size_t inlier_count = 0;
  Status status = Status::Failed;
  bool degenerate = false;

  bool ok() const { return status == Status::Success; }
};

using HomographyEstimate = EstimationResult<Homography>;
using PoseEstimate = EstimationResult<RelativePose>;

/// Hartley-normalized DLT. Exact for 4 non-degenerate pairs, least squares
/// beyond. Throws DegenerateConfiguration for collinear or duplicate inputs.
Homography dlt_homography(const MatchSet& matches);

/// max(forward transfer error, backward transfer error) in pixels; +inf when
/// either direction maps to infinity.
double symmetric_transfer_error(const Homography& h, const Homography& h_inv, const Match& m);

/// Pairs whose symmetric transfer error is below the threshold.
std::size_t count_inliers(const Homography& h, const MatchSet& matches, double threshold);

/// 4-point RANSAC with adaptive stopping and an inlier refit. Never throws on
/// bad data; deterministic given cfg.seed.
HomographyEstimate ransac_homography(const MatchSet& matches, const RansacConfig& cfg = {});

/// Normalized 8-point essential matrix (points given in normalized camera
/// coordinates), with the (1,1,0) singular value projection. Throws
/// DegenerateConfiguration when fewer than 8 points or the system has a
/// multi-dimensional null space.
Eigen::Matrix3d eight_point_essential(const std::vector<Eigen::Vector2d>& x1,
                                      const std::vector<Eigen::Vector2d>& x2);

/// Squared first-order geometric (Sampson) error in normalized coordinates.
double sampson_error(const Eigen::Matrix3d& e, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2);

/// The four (R, t) decompositions of an essential matrix.
std::vector<RelativePose> decompose_essential(const Eigen::Matrix3d& e);

/// Essential-matrix RANSAC with a Sampson threshold of cfg.threshold divided
/// by the mean focal length, followed by cheirality voting. Fails with fewer
/// than 8 matches, degenerate motion, or when no candidate places at least
/// half the inliers in front of both cameras.
PoseEstimate estimate_relative_pose(const MatchSet& matches, const CameraIntrinsics& k1,
                                    const CameraIntrinsics& k2, const RansacConfig& cfg = {});

/// Standard adaptive RANSAC iteration bound for the given inlier ratio.
int ransac_iterations_needed(double inlier_ratio, int sample_size, double confidence, int cap);

}  // namespace cmbench
