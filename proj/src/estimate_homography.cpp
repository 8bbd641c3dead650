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

constexpr double kCollinearEps = 1e-9;
constexpr double kNullSpaceRatio = 1e-9;

struct Normalization {
  Eigen::Matrix3d transform = Eigen::Matrix3d::Identity();
  std::vector<Eigen::Vector2d> points;
};

// Translate to the centroid, scale the mean distance to sqrt(2).
Normalization hartley_normalize(const std::vector<Eigen::Vector2d>& pts) {
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
  Normalization n;
  n.transform << s, 0.0, -s * centroid.x(),
                 0.0, s, -s * centroid.y(),
                 0.0, 0.0, 1.0;
  n.points.reserve(pts.size());
  for (const auto& p : pts) n.points.emplace_back(s * (p - centroid));
  return n;
}

bool any_three_collinear(const std::vector<Eigen::Vector2d>& p) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      for (std::size_t k = j + 1; k < p.size(); ++k) {
        const Eigen::Vector2d u = p[j] - p[i];
        const Eigen::Vector2d v = p[k] - p[i];
        if (std::abs(u.x() * v.y() - u.y() * v.x()) < kCollinearEps) return true;
      }
    }
  }
  return false;
}

std::vector<bool> inlier_mask(const Homography& h, const Homography& h_inv, const MatchSet& matches,
                              double threshold, std::size_t& count) {
  std::vector<bool> mask(matches.size(), false);
  count = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (symmetric_transfer_error(h, h_inv, matches[i]) < threshold) {
      mask[i] = true;
      ++count;
    }
  }
  return mask;
}

MatchSet select(const MatchSet& matches, const std::vector<bool>& mask) {
  MatchSet out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (mask[i]) out.push_back(matches[i]);
  }
  return out;
}

}  // namespace

void RansacConfig::validate() const {
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw Error(ErrorCode::InvalidArgument, "RANSAC threshold must be positive");
  }
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "RANSAC confidence must lie in (0, 1)");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::InvalidArgument, "RANSAC max_iterations must be positive");
  }
}

int ransac_iterations_needed(double inlier_ratio, int sample_size, double confidence, int cap) {
  if (inlier_ratio >= 1.0) return 1;
  if (inlier_ratio <= 0.0) return cap;
  const double all_good = std::pow(inlier_ratio, sample_size);
  const double denom = std::log1p(-all_good);
  if (!(denom < 0.0)) return cap;
  const double n = std::ceil(std::log1p(-confidence) / denom);
  if (!std::isfinite(n) || n >= cap) return cap;
  return std::max(1, static_cast<int>(n));
}

Homography dlt_homography(const MatchSet& matches) {
  const std::size_t n = matches.size();
  if (n < 4) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT needs at least 4 correspondences");
  }
  std::vector<Eigen::Vector2d> src;
  std::vector<Eigen::Vector2d> dst;
  src.reserve(n);
  dst.reserve(n);
  for (const Match& m : matches) {
    src.emplace_back(m.a.x, m.a.y);
    dst.emplace_back(m.b.x, m.b.y);
  }
  const Normalization ns = hartley_normalize(src);
  const Normalization nd = hartley_normalize(dst);
  if (n == 4 && (any_three_collinear(ns.points) || any_three_collinear(nd.points))) {
    throw Error(ErrorCode::DegenerateConfiguration, "three of four points are collinear");
  }

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ns.points[i].x();
    const double y = ns.points[i].y();
    const double u = nd.points[i].x();
    const double v = nd.points[i].y();
    a.row(2 * i) << -x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u;
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // A second (near-)null direction means the fit is not unique.
  if (sv.size() >= 8 && !(sv(7) > kNullSpaceRatio * sv(0))) {
    throw Error(ErrorCode::DegenerateConfiguration, "correspondences do not determine a unique homography");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d denorm = nd.transform.inverse() * hn * ns.transform;
  try {
    return Homography(denorm);
  } catch (const Error&) {
    throw Error(ErrorCode::DegenerateConfiguration, "DLT solution is singular");
  }
}

double symmetric_transfer_error(const Homography& h, const Homography& h_inv, const Match& m) {
  const auto fwd = try_apply_homography(h, m.a);
  const auto bwd = try_apply_homography(h_inv, m.b);
  if (!fwd || !bwd) return std::numeric_limits<double>::infinity();
  return std::max(distance(*fwd, m.b), distance(*bwd, m.a));
}

std::size_t count_inliers(const Homography& h, const MatchSet& matches, double threshold) {
  const Homography h_inv = invert_homography(h);
  std::size_t count = 0;
  for (const Match& m : matches) {
    if (symmetric_transfer_error(h, h_inv, m) < threshold) ++count;
  }
  return count;
}

namespace {

// Refits on the consensus set until it stops changing; a refit is kept only
// if it does not lose inliers.
void refine(const MatchSet& matches, double threshold, Homography& model, std::vector<bool>& mask,
            std::size_t& count) {
  for (int round = 0; round < 5; ++round) {
    try {
      const Homography refit = dlt_homography(select(matches, mask));
      const Homography refit_inv = invert_homography(refit);
      std::size_t refit_count = 0;
      auto refit_mask = inlier_mask(refit, refit_inv, matches, threshold, refit_count);
      if (refit_count < count) return;
      const bool unchanged = refit_mask == mask;
      count = refit_count;
      mask = std::move(refit_mask);
      model = refit;
      if (unchanged) return;
    } catch (const Error&) {
      return;
    }
  }
}

}  // namespace

HomographyEstimate ransac_homography(const MatchSet& matches, const RansacConfig& cfg) {
  cfg.validate();
  HomographyEstimate result;
  const std::size_t n = matches.size();
  result.inlier_mask.assign(n, false);
  if (n < 4) return result;

  std::mt19937_64 rng(cfg.seed);
  std::size_t best_count = 0;
  std::vector<bool> best_mask;
  std::optional<Homography> best_model;
  int needed = cfg.max_iterations;
  MatchSet sample(4);

  for (int it = 0; it < needed; ++it) {
    std::array<std::size_t, 4> idx{};
    for (std::size_t k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = static_cast<std::size_t>(rng() % n);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      }
      sample[k] = matches[idx[k]];
    }
    try {
      const Homography h = dlt_homography(sample);
      const Homography h_inv = invert_homography(h);
      std::size_t count = 0;
      auto mask = inlier_mask(h, h_inv, matches, cfg.threshold, count);
      if (count > best_count) {
        best_count = count;
        best_mask = std::move(mask);
        best_model = h;
        needed = ransac_iterations_needed(double(best_count) / double(n), 4, cfg.confidence, cfg.max_iterations);
      }
    } catch (const Error&) {
      continue;
    }
  }

  if (!best_model || best_count < 4) return result;
  refine(matches, cfg.threshold, *best_model, best_mask, best_count);

  result.model = best_model;
  result.inlier_mask = std::move(best_mask);
  result.inlier_count = best_count;
  result.status = Status::Success;
  return result;
}

}  // namespace cmbench
