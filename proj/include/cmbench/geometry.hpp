#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace cmbench {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// 3x3 projective transform. Stored normalized so that m(2,2) == 1 whenever
/// the input has a non-zero m(2,2).
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}
  /// Throws SingularMatrix when |det| <= 1e-12 or an entry is non-finite.
  explicit Homography(const Eigen::Matrix3d& m);

  static Homography identity() { return Homography(); }
  static Homography translation(double tx, double ty);
  static Homography scaling(double sx, double sy);

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Homography operator*(const Homography& rhs) const { return Homography(m_ * rhs.m_); }

 private:
  Eigen::Matrix3d m_;
};

struct RelativePose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::UnitX();

  /// Checks orthonormality, det = +1 and unit translation within 1e-9.
  bool is_valid(double tol = 1e-9) const;
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  bool is_valid() const { return fx > 0.0 && fy > 0.0; }
  Eigen::Matrix3d matrix() const;
};

struct Match {
  Point2 a;
  Point2 b;
  std::optional<double> confidence;

  friend bool operator==(const Match&, const Match&) = default;
};

using MatchSet = std::vector<Match>;

inline constexpr std::size_t kDefaultMatchCap = 2048;

/// Throws DegeneratePoint when the homogeneous depth is within 1e-12 of zero.
Point2 apply_homography(const Homography& h, const Point2& p);

/// Non-throwing variant for hot loops; empty when the point maps to infinity.
std::optional<Point2> try_apply_homography(const Homography& h, const Point2& p);

/// Throws SingularMatrix when |det| <= 1e-12.
Homography invert_homography(const Homography& h);

/// max(rotation geodesic angle, translation direction angle up to sign), in degrees.
double pose_angular_error(const RelativePose& est, const RelativePose& gt);

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);
double translation_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

double distance(const Point2& a, const Point2& b);

}  // namespace cmbench
