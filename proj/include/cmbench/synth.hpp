#pragma once

#include <cstdint>
#include <vector>

#include "cmbench/geometry.hpp"

namespace cmbench {

struct Range {
  double low = 0.0;
  double high = 0.0;

  bool contains(double v, double slack = 0.0) const { return v >= low - slack && v <= high + slack; }
};

/// Uniform ranges for the random homography protocol. Rotation in degrees,
/// translation as a fraction of frame width/height, perspective as the
/// dimensionless coefficient before division by width/height.
struct HomographySamplerParams {
  Range scale{0.65, 1.35};
  Range rotation_deg{-25.0, 25.0};
  Range perspective{-0.23, 0.23};
  Range translation{-0.17, 0.17};
  double min_overlap = 0.60;
  int max_draws = 1000;

  /// Throws InvalidArgument when a range is inverted or min_overlap is outside (0, 1].
  void validate() const;
};

/// Parameters of one draw, in construction order.
struct HomographyParams {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double perspective_x = 0.0;
  double perspective_y = 0.0;
  double translation_x = 0.0;
  double translation_y = 0.0;
};

struct FrameSize {
  int width = 0;
  int height = 0;

  friend bool operator==(const FrameSize&, const FrameSize&) = default;
};

struct SyntheticPair {
  Homography ground_truth;
  FrameSize source_size;
  FrameSize target_size;
  std::uint64_t seed = 0;
  HomographyParams params;
  double overlap = 0.0;
};

/// Builds the transform: scale and rotate about the frame centre, perturb the
/// projective row (scaled by 1/width, 1/height), then translate by
/// (tx * width, ty * height).
Homography compose_homography(const HomographyParams& p, int width, int height);

/// Inverse of compose_homography for transforms built by it.
HomographyParams decompose_homography(const Homography& h, int width, int height);

/// Deterministic in (seed, width, height, params). Throws SamplingExhausted
/// after params.max_draws rejected draws and InvalidArgument for frames
/// smaller than 32 px.
SyntheticPair sample_homography(std::uint64_t seed, int width, int height,
                                const HomographySamplerParams& params = {});

/// Fraction of the target frame covered by the warped source frame.
/// Throws DegenerateQuad when a corner does not map to a finite point.
double overlap_ratio(const Homography& h, int width, int height);

struct WarpResult {
  std::vector<Point2> points;
  std::vector<std::size_t> dropped;  // input indices that mapped to infinity
};

WarpResult warp_correspondences(const Homography& h, const std::vector<Point2>& points);

/// Area of the intersection of a simple polygon with [0,w]x[0,h].
double clipped_polygon_area(const std::vector<Point2>& polygon, double width, double height);

}  // namespace cmbench
