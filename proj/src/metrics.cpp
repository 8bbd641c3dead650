#include "cmbench/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "cmbench/error.hpp"

namespace cmbench {

namespace {

void require_non_empty(const std::vector<PairError>& errors) {
  if (errors.empty()) throw Error(ErrorCode::EmptyInput, "no pair errors to aggregate");
}

}  // namespace

PairError PairError::failed(std::string id) {
  return {std::move(id), std::numeric_limits<double>::quiet_NaN(), Status::Failed};
}

double corner_error(const Homography& h_est, const Homography& h_gt, double width, double height) {
  const std::array<Point2, 4> corners{Point2{0.0, 0.0}, Point2{width, 0.0}, Point2{width, height},
                                      Point2{0.0, height}};
  double total = 0.0;
  for (const Point2& c : corners) {
    total += distance(apply_homography(h_est, c), apply_homography(h_gt, c));
  }
  return total / 4.0;
}

double auc(const std::vector<PairError>& errors, double tau) {
  require_non_empty(errors);
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::InvalidArgument, "AUC threshold must be positive");
  }
  // Integral over [0, tau] of 1[e <= eps] is max(0, tau - e).
  double area = 0.0;
  for (const PairError& e : errors) {
    if (e.ok()) area += std::max(0.0, tau - e.value);
  }
  return area / (static_cast<double>(errors.size()) * tau);
}

double median_error(const std::vector<PairError>& errors) {
  std::vector<double> values;
  for (const PairError& e : errors) {
    if (e.ok()) values.push_back(e.value);
  }
  if (values.empty()) throw Error(ErrorCode::NoSuccesses, "median over zero successful pairs");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double success_rate(const std::vector<PairError>& errors, double tau) {
  require_non_empty(errors);
  const auto hits = std::count_if(errors.begin(), errors.end(),
                                  [tau](const PairError& e) { return e.ok() && e.value <= tau; });
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

double estimation_success_rate(const std::vector<PairError>& errors) {
  require_non_empty(errors);
  const auto ok = std::count_if(errors.begin(), errors.end(), [](const PairError& e) { return e.ok(); });
  return static_cast<double>(ok) / static_cast<double>(errors.size());
}

double geo_error(const Homography& h_est, const GeoAnnotation& annotation) {
  if (annotation.thermal_points.empty()) {
    throw Error(ErrorCode::EmptyInput, "annotation has no ground-truth points");
  }
  if (annotation.thermal_points.size() != annotation.satellite_points.size()) {
    throw Error(ErrorCode::MisalignedLists, "thermal and satellite point lists differ in length");
  }
  if (!(annotation.meters_per_pixel > 0.0)) {
    throw Error(ErrorCode::NonPositiveScale, "meters_per_pixel must be positive");
  }
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < annotation.thermal_points.size(); ++i) {
    const double d = distance(apply_homography(h_est, annotation.thermal_points[i]),
                              annotation.satellite_points[i]);
    sum_sq += d * d;
  }
  const double rms = std::sqrt(sum_sq / static_cast<double>(annotation.thermal_points.size()));
  return rms * annotation.meters_per_pixel;
}

std::vector<double> scene_balanced_auc(const std::vector<TaggedPairError>& per_pair,
                                       const std::vector<double>& taus) {
  if (per_pair.empty()) throw Error(ErrorCode::EmptyInput, "no tagged pairs");

  std::map<std::string, std::vector<PairError>> by_scene;
  std::map<std::string, std::string> split_of_scene;
  for (const TaggedPairError& t : per_pair) {
    if (t.scene_id.empty() || t.split_id.empty()) {
      throw Error(ErrorCode::MissingTag, "pair '" + t.error.pair_id + "' lacks a scene or split tag");
    }
    auto [it, inserted] = split_of_scene.emplace(t.scene_id, t.split_id);
    if (!inserted && it->second != t.split_id) {
      throw Error(ErrorCode::ConflictingTag, "scene '" + t.scene_id + "' appears in two splits");
    }
    by_scene[t.scene_id].push_back(t.error);
  }

  std::map<std::string, std::vector<std::string>> scenes_of_split;
  for (const auto& [scene, split] : split_of_scene) scenes_of_split[split].push_back(scene);

  std::vector<double> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    double weighted = 0.0;
    std::size_t total_scenes = 0;
    for (const auto& [split, scenes] : scenes_of_split) {
      double split_sum = 0.0;
      for (const std::string& scene : scenes) split_sum += auc(by_scene.at(scene), tau);
      const double split_mean = split_sum / static_cast<double>(scenes.size());
      weighted += static_cast<double>(scenes.size()) * split_mean;
      total_scenes += scenes.size();
    }
    out.push_back(weighted / static_cast<double>(total_scenes));
  }
  return out;
}

}  // namespace cmbench
