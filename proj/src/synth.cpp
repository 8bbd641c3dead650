#include "cmbench/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "cmbench/error.hpp"
#include "cmbench/random.hpp"

namespace cmbench {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double draw(std::mt19937_64& rng, const Range& r) { return r.low + (r.high - r.low) * unit_uniform(rng); }

void check_range(const Range& r, const char* name) {
  if (!(r.low <= r.high) || !std::isfinite(r.low) || !std::isfinite(r.high)) {
    throw Error(ErrorCode::InvalidArgument, std::string("inverted or non-finite range: ") + name);
  }
}

Eigen::Matrix3d translate(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

double polygon_area(const std::vector<Point2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    twice += p.x * q.y - q.x * p.y;
  }
  return std::abs(twice) / 2.0;
}

// One Sutherland-Hodgman pass: keeps the part of the polygon inside one clip edge.
template <typename Inside, typename Cut>
std::vector<Point2> clip_pass(const std::vector<Point2>& in, Inside inside, Cut cut) {
  std::vector<Point2> out;
  if (in.empty()) return out;
  out.reserve(in.size() + 2);
  Point2 prev = in.back();
  bool prev_in = inside(prev);
  for (const Point2& cur : in) {
    const bool cur_in = inside(cur);
    if (cur_in) {
      if (!prev_in) out.push_back(cut(prev, cur));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(cut(prev, cur));
    }
    prev = cur;
    prev_in = cur_in;
  }
  return out;
}

Point2 cut_x(const Point2& a, const Point2& b, double x) {
  const double t = (x - a.x) / (b.x - a.x);
  return {x, a.y + t * (b.y - a.y)};
}

Point2 cut_y(const Point2& a, const Point2& b, double y) {
  const double t = (y - a.y) / (b.y - a.y);
  return {a.x + t * (b.x - a.x), y};
}

}  // namespace

void HomographySamplerParams::validate() const {
  check_range(scale, "scale");
  check_range(rotation_deg, "rotation");
  check_range(perspective, "perspective");
  check_range(translation, "translation");
  if (!(min_overlap > 0.0 && min_overlap <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "min_overlap must lie in (0, 1]");
  }
  if (max_draws < 1) {
    throw Error(ErrorCode::InvalidArgument, "max_draws must be positive");
  }
}

Homography compose_homography(const HomographyParams& p, int width, int height) {
  const double cx = width / 2.0;
  const double cy = height / 2.0;
  const double theta = p.rotation_deg * kDegToRad;
  const double c = std::cos(theta);
  const double s = std::sin(theta);

  Eigen::Matrix3d similarity = Eigen::Matrix3d::Identity();
  similarity << p.scale * c, -p.scale * s, 0.0,
                p.scale * s,  p.scale * c, 0.0,
                0.0,          0.0,         1.0;

  Eigen::Matrix3d perspective = Eigen::Matrix3d::Identity();
  perspective(2, 0) = p.perspective_x / width;
  perspective(2, 1) = p.perspective_y / height;

  const Eigen::Matrix3d m = translate(cx + p.translation_x * width, cy + p.translation_y * height) *
                            perspective * similarity * translate(-cx, -cy);
  return Homography(m);
}

HomographyParams decompose_homography(const Homography& h, int width, int height) {
  const double cx = width / 2.0;
  const double cy = height / 2.0;
  // H * T(c) = T(c + t) * P * A, with A the centred similarity.
  Eigen::Matrix3d k = h.matrix() * translate(cx, cy);
  k /= k(2, 2);
  const Eigen::Vector2d shift(k(0, 2), k(1, 2));
  const Eigen::RowVector2d bottom(k(2, 0), k(2, 1));
  const Eigen::Matrix2d sr = k.topLeftCorner<2, 2>() - shift * bottom;
  const Eigen::RowVector2d persp = bottom * sr.inverse();

  HomographyParams p;
  p.scale = std::sqrt(sr.determinant());
  p.rotation_deg = std::atan2(sr(1, 0), sr(0, 0)) / kDegToRad;
  p.perspective_x = persp(0) * width;
  p.perspective_y = persp(1) * height;
  p.translation_x = (shift(0) - cx) / width;
  p.translation_y = (shift(1) - cy) / height;
  return p;
}

SyntheticPair sample_homography(std::uint64_t seed, int width, int height,
                                const HomographySamplerParams& params) {
  if (width < 32 || height < 32) {
    throw Error(ErrorCode::InvalidArgument, "frame must be at least 32x32 pixels");
  }
  params.validate();
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < params.max_draws; ++attempt) {
    HomographyParams p;
    p.scale = draw(rng, params.scale);
    p.rotation_deg = draw(rng, params.rotation_deg);
    p.perspective_x = draw(rng, params.perspective);
    p.perspective_y = draw(rng, params.perspective);
    p.translation_x = draw(rng, params.translation);
    p.translation_y = draw(rng, params.translation);

    Homography h;
    double overlap = 0.0;
    try {
      h = compose_homography(p, width, height);
      overlap = overlap_ratio(h, width, height);
    } catch (const Error&) {
      continue;
    }
    if (overlap >= params.min_overlap) {
      return SyntheticPair{h, {width, height}, {width, height}, seed, p, overlap};
    }
  }
  throw Error(ErrorCode::SamplingExhausted,
              "no draw reached min_overlap after " + std::to_string(params.max_draws) + " attempts");
}

double clipped_polygon_area(const std::vector<Point2>& polygon, double width, double height) {
  std::vector<Point2> poly = polygon;
  poly = clip_pass(poly, [](const Point2& p) { return p.x >= 0.0; },
                   [](const Point2& a, const Point2& b) { return cut_x(a, b, 0.0); });
  poly = clip_pass(poly, [&](const Point2& p) { return p.x <= width; },
                   [&](const Point2& a, const Point2& b) { return cut_x(a, b, width); });
  poly = clip_pass(poly, [](const Point2& p) { return p.y >= 0.0; },
                   [](const Point2& a, const Point2& b) { return cut_y(a, b, 0.0); });
  poly = clip_pass(poly, [&](const Point2& p) { return p.y <= height; },
                   [&](const Point2& a, const Point2& b) { return cut_y(a, b, height); });
  if (poly.size() < 3) return 0.0;
  return polygon_area(poly);
}

double overlap_ratio(const Homography& h, int width, int height) {
  const std::array<Point2, 4> corners{Point2{0.0, 0.0}, Point2{double(width), 0.0},
                                      Point2{double(width), double(height)},
                                      Point2{0.0, double(height)}};
  const Eigen::Matrix3d& m = h.matrix();
  std::vector<Point2> quad;
  quad.reserve(4);
  for (const Point2& c : corners) {
    // A corner at or behind the camera plane means the frame image wraps through infinity.
    const double w = m(2, 0) * c.x + m(2, 1) * c.y + m(2, 2);
    auto p = try_apply_homography(h, c);
    if (!p || !(w > 0.0)) {
      throw Error(ErrorCode::DegenerateQuad, "warped frame corner is not finite");
    }
    quad.push_back(*p);
  }
  const double area = clipped_polygon_area(quad, width, height);
  return std::clamp(area / (double(width) * double(height)), 0.0, 1.0);
}

WarpResult warp_correspondences(const Homography& h, const std::vector<Point2>& points) {
  WarpResult out;
  out.points.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (auto p = try_apply_homography(h, points[i])) {
      out.points.push_back(*p);
    } else {
      out.dropped.push_back(i);
    }
  }
  return out;
}

}  // namespace cmbench
