#pragma once

#include <string>
#include <vector>

#include "cmbench/estimate.hpp"
#include "cmbench/geometry.hpp"

namespace cmbench {

/// Per-pair error in the task's unit (pixels, degrees or meters).
/// Failed entries carry no finite value.
struct PairError {
  std::string pair_id;
  double value = 0.0;
  Status status = Status::Failed;

  static PairError success(std::string id, double v) { return {std::move(id), v, Status::Success}; }
  static PairError failed(std::string id);

  bool ok() const { return status == Status::Success; }
};

struct TaggedPairError {
  PairError error;
  std::string scene_id;
  std::string split_id;
};

struct GeoAnnotation {
  std::string pair_id;
  std::vector<Point2> thermal_points;
  std::vector<Point2> satellite_points;
  double meters_per_pixel = 1.0;
  std::string note;

  friend bool operator==(const GeoAnnotation&, const GeoAnnotation&) = default;
};

/// Mean distance over the four frame corners between the two warps.
double corner_error(const Homography& h_est, const Homography& h_gt, double width, double height);

/// Normalized area under the recall curve on [0, tau]; failed pairs have
/// zero recall everywhere. Throws EmptyInput / InvalidArgument.
double auc(const std::vector<PairError>& errors, double tau);

/// Median over successful entries only. Throws NoSuccesses.
double median_error(const std::vector<PairError>& errors);

/// Successes with value <= tau divided by all entries. Throws EmptyInput.
double success_rate(const std::vector<PairError>& errors, double tau);

/// Fraction of entries with Success status. Throws EmptyInput.
double estimation_success_rate(const std::vector<PairError>& errors);

/// RMS satellite-pixel distance of projected thermal points, in meters.
/// Throws DegeneratePoint when a point cannot be projected.
double geo_error(const Homography& h_est, const GeoAnnotation& annotation);

/// Scene AUC -> unweighted split mean -> split means weighted by scene count.
/// Returns one value per tau. Throws MissingTag, ConflictingTag, EmptyInput.
std::vector<double> scene_balanced_auc(const std::vector<TaggedPairError>& per_pair,
                                       const std::vector<double>& taus);

}  // namespace cmbench
