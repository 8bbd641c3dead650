#include "cmbench/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "cmbench/error.hpp"

namespace cmbench {

namespace {

constexpr double kDepthEps = 1e-12;
constexpr double kDetEps = 1e-12;

Eigen::Matrix3d normalized(const Eigen::Matrix3d& m) {
  if (m(2, 2) != 0.0) {
    return m / m(2, 2);
  }
  return m;
}

double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegeneratePoint: return "DegeneratePoint";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::DegenerateQuad: return "DegenerateQuad";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoSuccesses: return "NoSuccesses";
    case ErrorCode::MissingTag: return "MissingTag";
    case ErrorCode::ConflictingTag: return "ConflictingTag";
    case ErrorCode::UnknownProvider: return "UnknownProvider";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AllBranchesFailed: return "AllBranchesFailed";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::CapExceeded: return "CapExceeded";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::MisalignedLists: return "MisalignedLists";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Homography::Homography(const Eigen::Matrix3d& m) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::SingularMatrix, "homography has non-finite entries");
  }
  m_ = normalized(m);
  if (!(std::abs(m_.determinant()) > kDetEps)) {
    throw Error(ErrorCode::SingularMatrix, "homography determinant below 1e-12");
  }
}

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::scaling(double sx, double sy) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return Homography(m);
}

bool RelativePose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const Eigen::Matrix3d rtr = rotation.transpose() * rotation;
  if ((rtr - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rotation.determinant() - 1.0) > tol) return false;
  return std::abs(translation.norm() - 1.0) <= tol;
}

Eigen::Matrix3d CameraIntrinsics::matrix() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

std::optional<Point2> try_apply_homography(const Homography& h, const Point2& p) {
  const Eigen::Matrix3d& m = h.matrix();
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (!(std::abs(w) > kDepthEps)) return std::nullopt;
  const double u = m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2);
  const double v = m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2);
  Point2 out{u / w, v / w};
  if (!std::isfinite(out.x) || !std::isfinite(out.y)) return std::nullopt;
  return out;
}

Point2 apply_homography(const Homography& h, const Point2& p) {
  auto out = try_apply_homography(h, p);
  if (!out) {
    throw Error(ErrorCode::DegeneratePoint, "point maps to the line at infinity");
  }
  return *out;
}

Homography invert_homography(const Homography& h) {
  const Eigen::Matrix3d& m = h.matrix();
  if (!(std::abs(m.determinant()) > kDetEps)) {
    throw Error(ErrorCode::SingularMatrix, "cannot invert homography with |det| <= 1e-12");
  }
  return Homography(m.inverse());
}

double rotation_angle_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  // atan2 form stays accurate near 0 and 180 degrees where acos does not.
  const Eigen::Matrix3d rel = a.transpose() * b;
  const Eigen::Vector3d axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return rad2deg(std::atan2(axis.norm(), rel.trace() - 1.0));
}

double translation_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double theta = rad2deg(std::atan2(a.cross(b).norm(), a.dot(b)));
  return std::min(theta, 180.0 - theta);
}

double pose_angular_error(const RelativePose& est, const RelativePose& gt) {
  return std::max(rotation_angle_deg(est.rotation, gt.rotation),
                  translation_angle_deg(est.translation, gt.translation));
}

double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace cmbench
