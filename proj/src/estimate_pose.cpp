#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>

#include "cmbench/error.hpp"
#include "cmbench/estimate.hpp"

namespace cmbench {

namespace {

constexpr int kSampleSize = 8;
constexpr double kNullSpaceRatio = 1e-8;

Eigen::Matrix3d normalizer(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  if (!(mean_dist > 0.0) || !std::isfinite(mean_dist)) {
    throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * centroid.x(),
       0.0, s, -s * centroid.y(),
       0.0, 0.0, 1.0;
  return t;
}

// Linear two-view triangulation with P1 = [I|0], P2 = [R|t]; true when the
// point lies in front of both cameras.
bool in_front(const RelativePose& pose, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  Eigen::Matrix<double, 3, 4> p1 = Eigen::Matrix<double, 3, 4>::Zero();
  p1.leftCols<3>().setIdentity();
  Eigen::Matrix<double, 3, 4> p2;
  p2.leftCols<3>() = pose.rotation;
  p2.col(3) = pose.translation;

  Eigen::Matrix4d a;
  a.row(0) = x1.x() * p1.row(2) - p1.row(0);
  a.row(1) = x1.y() * p1.row(2) - p1.row(1);
  a.row(2) = x2.x() * p2.row(2) - p2.row(0);
  a.row(3) = x2.y() * p2.row(2) - p2.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d x = svd.matrixV().col(3);
  if (!(std::abs(x(3)) > 1e-12)) return false;
  const Eigen::Vector3d p = x.head<3>() / x(3);
  const double depth2 = (pose.rotation * p + pose.translation).z();
  return p.z() > 0.0 && depth2 > 0.0;
}

struct Hypothesis {
  Eigen::Matrix3d e;
  std::vector<bool> mask;
  std::size_t count = 0;
};

Hypothesis score(const Eigen::Matrix3d& e, const std::vector<Eigen::Vector2d>& x1,
                 const std::vector<Eigen::Vector2d>& x2, double threshold_sq) {
  Hypothesis h{e, std::vector<bool>(x1.size(), false), 0};
  for (std::size_t i = 0; i < x1.size(); ++i) {
    if (sampson_error(e, x1[i], x2[i]) < threshold_sq) {
      h.mask[i] = true;
      ++h.count;
    }
  }
  return h;
}

}  // namespace

Eigen::Matrix3d eight_point_essential(const std::vector<Eigen::Vector2d>& x1,
                                      const std::vector<Eigen::Vector2d>& x2) {
  const std::size_t n = x1.size();
  if (n < 8 || x2.size() != n) {
    throw Error(ErrorCode::DegenerateConfiguration, "8-point solver needs at least 8 pairs");
  }
  const Eigen::Matrix3d t1 = normalizer(x1);
  const Eigen::Matrix3d t2 = normalizer(x2);
  Eigen::MatrixXd a(n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p = t1 * x1[i].homogeneous();
    const Eigen::Vector3d q = t2 * x2[i].homogeneous();
    a.row(i) << q.x() * p.x(), q.x() * p.y(), q.x(),
                q.y() * p.x(), q.y() * p.y(), q.y(),
                p.x(), p.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(7) > kNullSpaceRatio * sv(0))) {
    throw Error(ErrorCode::DegenerateConfiguration, "essential system has a multi-dimensional null space");
  }
  const Eigen::VectorXd f = svd.matrixV().col(8);
  Eigen::Matrix3d en;
  en << f(0), f(1), f(2), f(3), f(4), f(5), f(6), f(7), f(8);
  Eigen::Matrix3d e = t2.transpose() * en * t1;

  Eigen::JacobiSVD<Eigen::Matrix3d> esvd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d projected(1.0, 1.0, 0.0);
  e = esvd.matrixU() * projected.asDiagonal() * esvd.matrixV().transpose();
  return e;
}

double sampson_error(const Eigen::Matrix3d& e, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  const Eigen::Vector3d p = x1.homogeneous();
  const Eigen::Vector3d q = x2.homogeneous();
  const Eigen::Vector3d ep = e * p;
  const Eigen::Vector3d etq = e.transpose() * q;
  const double num = q.dot(ep);
  const double den = ep.x() * ep.x() + ep.y() * ep.y() + etq.x() * etq.x() + etq.y() * etq.y();
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return num * num / den;
}

std::vector<RelativePose> decompose_essential(const Eigen::Matrix3d& e) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0,
       1.0, 0.0, 0.0,
       0.0, 0.0, 1.0;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2).normalized();
  return {RelativePose{r1, t}, RelativePose{r1, -t}, RelativePose{r2, t}, RelativePose{r2, -t}};
}

PoseEstimate estimate_relative_pose(const MatchSet& matches, const CameraIntrinsics& k1,
                                    const CameraIntrinsics& k2, const RansacConfig& cfg) {
  cfg.validate();
  if (!k1.is_valid() || !k2.is_valid()) {
    throw Error(ErrorCode::InvalidArgument, "intrinsics need positive focal lengths");
  }
  PoseEstimate result;
  const std::size_t n = matches.size();
  result.inlier_mask.assign(n, false);
  if (n < static_cast<std::size_t>(kSampleSize)) return result;

  std::vector<Eigen::Vector2d> x1;
  std::vector<Eigen::Vector2d> x2;
  x1.reserve(n);
  x2.reserve(n);
  for (const Match& m : matches) {
    x1.emplace_back((m.a.x - k1.cx) / k1.fx, (m.a.y - k1.cy) / k1.fy);
    x2.emplace_back((m.b.x - k2.cx) / k2.fx, (m.b.y - k2.cy) / k2.fy);
  }
  const double mean_focal = (k1.fx + k1.fy + k2.fx + k2.fy) / 4.0;
  const double thr = cfg.threshold / mean_focal;
  const double thr_sq = thr * thr;

  std::mt19937_64 rng(cfg.seed);
  std::optional<Hypothesis> best;
  int needed = cfg.max_iterations;
  std::size_t degenerate_samples = 0;
  int attempts = 0;
  std::vector<Eigen::Vector2d> s1(kSampleSize);
  std::vector<Eigen::Vector2d> s2(kSampleSize);
  for (int it = 0; it < needed; ++it, ++attempts) {
    std::array<std::size_t, kSampleSize> idx{};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = static_cast<std::size_t>(rng() % n);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      }
      s1[k] = x1[idx[k]];
      s2[k] = x2[idx[k]];
    }
    try {
      Hypothesis h = score(eight_point_essential(s1, s2), x1, x2, thr_sq);
      if (!best || h.count > best->count) {
        best = std::move(h);
        needed = ransac_iterations_needed(double(best->count) / double(n), kSampleSize, cfg.confidence,
                                          cfg.max_iterations);
      }
    } catch (const Error&) {
      ++degenerate_samples;
    }
  }
  if (!best) {
    result.degenerate = degenerate_samples == static_cast<std::size_t>(attempts);
    return result;
  }

  for (int round = 0; round < 5 && best->count >= static_cast<std::size_t>(kSampleSize); ++round) {
    std::vector<Eigen::Vector2d> in1;
    std::vector<Eigen::Vector2d> in2;
    for (std::size_t i = 0; i < n; ++i) {
      if (best->mask[i]) {
        in1.push_back(x1[i]);
        in2.push_back(x2[i]);
      }
    }
    try {
      Hypothesis refit = score(eight_point_essential(in1, in2), x1, x2, thr_sq);
      if (refit.count < best->count) break;
      const bool unchanged = refit.mask == best->mask;
      best = std::move(refit);
      if (unchanged) break;
    } catch (const Error&) {
      break;
    }
  }
  if (best->count < static_cast<std::size_t>(kSampleSize)) return result;

  // Cheirality vote over the consensus set.
  const auto candidates = decompose_essential(best->e);
  std::size_t best_votes = 0;
  std::size_t winner = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::size_t votes = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (best->mask[i] && in_front(candidates[c], x1[i], x2[i])) ++votes;
    }
    if (votes > best_votes) {
      best_votes = votes;
      winner = c;
    }
  }
  if (2 * best_votes < best->count) return result;

  result.model = candidates[winner];
  result.inlier_mask = best->mask;
  result.inlier_count = best->count;
  result.status = Status::Success;
  return result;
}

}  // namespace cmbench
