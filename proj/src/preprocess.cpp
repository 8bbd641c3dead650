#include "cmbench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmbench/error.hpp"

namespace cmbench {

namespace {

constexpr std::array<std::string_view, 4> kBranchNames{"none", "unsharp", "scharr_lcn", "morph_gradient"};

// Horizontal then vertical separable correlation with reflected borders.
std::vector<double> separable_blur(const GrayImage& img, const std::vector<double>& k) {
  const int w = img.width;
  const int h = img.height;
  const int r = static_cast<int>(k.size() / 2);
  std::vector<double> tmp(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += k[d + r] * img.at(reflect_index(x + d, w), y);
      tmp[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  std::vector<double> out(tmp.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) acc += k[d + r] * tmp[static_cast<std::size_t>(reflect_index(y + d, h)) * w + x];
      out[static_cast<std::size_t>(y) * w + x] = acc;
    }
  }
  return out;
}

template <typename Pick>
GrayImage separable_rank(const GrayImage& img, int r, Pick pick) {
  const int w = img.width;
  const int h = img.height;
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = img.at(reflect_index(x - r, w), y);
      for (int d = -r + 1; d <= r; ++d) v = pick(v, img.at(reflect_index(x + d, w), y));
      tmp.at(x, y) = v;
    }
  }
  GrayImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = tmp.at(x, reflect_index(y - r, h));
      for (int d = -r + 1; d <= r; ++d) v = pick(v, tmp.at(x, reflect_index(y + d, h)));
      out.at(x, y) = v;
    }
  }
  return out;
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
  if (w < 0 || h < 0) throw Error(ErrorCode::InvalidArgument, "negative image dimensions");
}

GrayImage::GrayImage(int w, int h, std::vector<std::uint8_t> pixels) : width(w), height(h), data(std::move(pixels)) {
  if (w < 0 || h < 0 || data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
    throw Error(ErrorCode::InvalidArgument, "pixel buffer does not match width x height");
  }
}

std::optional<BranchId> branch_from_code(long long code) {
  if (code < 0 || code >= static_cast<long long>(kBranchCount)) return std::nullopt;
  return static_cast<BranchId>(code);
}

std::string_view branch_name(BranchId b) { return kBranchNames[static_cast<std::size_t>(branch_code(b))]; }

std::optional<BranchId> branch_from_name(std::string_view name) {
  for (BranchId b : kAllBranches) {
    if (branch_name(b) == name) return b;
  }
  return std::nullopt;
}

void BranchParams::validate() const {
  if (!(unsharp_sigma > 0.0) || !std::isfinite(unsharp_sigma)) {
    throw Error(ErrorCode::InvalidArgument, "unsharp sigma must be positive");
  }
  if (!std::isfinite(unsharp_amount)) throw Error(ErrorCode::InvalidArgument, "unsharp amount must be finite");
  if (lcn_window < 3 || lcn_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "LCN window must be odd and >= 3");
  }
  if (!(lcn_epsilon > 0.0)) throw Error(ErrorCode::InvalidArgument, "LCN epsilon must be positive");
  if (morph_radius < 1) throw Error(ErrorCode::InvalidArgument, "morphological radius must be >= 1");
}

int reflect_index(int i, int n) {
  if (n <= 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int d = -r; d <= r; ++d) {
    k[d + r] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += k[d + r];
  }
  for (double& v : k) v /= sum;
  return k;
}

std::uint8_t to_byte(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

GrayImage branch_none(const GrayImage& img) { return img; }

GrayImage branch_unsharp(const GrayImage& img, double sigma, double amount) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "unsharp sigma must be positive");
  GrayImage out(img.width, img.height);
  if (img.empty()) return out;
  const std::vector<double> blur = separable_blur(img, gaussian_kernel(sigma));
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const double v = img.data[i];
    out.data[i] = to_byte(v + amount * (v - blur[i]));
  }
  return out;
}

GrayImage branch_scharr_lcn(const GrayImage& img, int lcn_window, double epsilon) {
  if (lcn_window < 3 || lcn_window % 2 == 0) {
    throw Error(ErrorCode::InvalidArgument, "LCN window must be odd and >= 3");
  }
  const int w = img.width;
  const int h = img.height;
  GrayImage out(w, h);
  if (img.empty()) return out;

  auto px = [&](int x, int y) -> double { return img.at(reflect_index(x, w), reflect_index(y, h)); };
  std::vector<double> mag(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 3.0 * (px(x + 1, y - 1) - px(x - 1, y - 1)) + 10.0 * (px(x + 1, y) - px(x - 1, y)) +
                        3.0 * (px(x + 1, y + 1) - px(x - 1, y + 1));
      const double gy = 3.0 * (px(x - 1, y + 1) - px(x - 1, y - 1)) + 10.0 * (px(x, y + 1) - px(x, y - 1)) +
                        3.0 * (px(x + 1, y + 1) - px(x + 1, y - 1));
      mag[static_cast<std::size_t>(y) * w + x] = std::sqrt(gx * gx + gy * gy);
    }
  }

  // Summed-area tables over the reflect-padded magnitude.
  const int half = lcn_window / 2;
  const int pw = w + 2 * half;
  const int ph = h + 2 * half;
  std::vector<double> s1(static_cast<std::size_t>(pw + 1) * (ph + 1), 0.0);
  std::vector<double> s2(s1.size(), 0.0);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      const double m = mag[static_cast<std::size_t>(reflect_index(y - half, h)) * w + reflect_index(x - half, w)];
      const std::size_t i = static_cast<std::size_t>(y + 1) * (pw + 1) + (x + 1);
      const std::size_t up = static_cast<std::size_t>(y) * (pw + 1) + (x + 1);
      const std::size_t left = i - 1;
      const std::size_t diag = up - 1;
      s1[i] = m + s1[up] + s1[left] - s1[diag];
      s2[i] = m * m + s2[up] + s2[left] - s2[diag];
    }
  }
  auto box = [&](const std::vector<double>& s, int x, int y) {
    // Window in padded coordinates is [x, x + window) x [y, y + window).
    const int x1 = x + lcn_window;
    const int y1 = y + lcn_window;
    auto at = [&](int xx, int yy) { return s[static_cast<std::size_t>(yy) * (pw + 1) + xx]; };
    return at(x1, y1) - at(x, y1) - at(x1, y) + at(x, y);
  };

  const double area = static_cast<double>(lcn_window) * lcn_window;
  std::vector<double> norm(mag.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double mean = box(s1, x, y) / area;
      const double var = std::max(0.0, box(s2, x, y) / area - mean * mean);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      norm[i] = (mag[i] - mean) / (std::sqrt(var) + epsilon);
    }
  }

  const auto [lo_it, hi_it] = std::minmax_element(norm.begin(), norm.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi - lo > 1e-12)) {
    std::fill(out.data.begin(), out.data.end(), std::uint8_t{128});
    return out;
  }
  for (std::size_t i = 0; i < norm.size(); ++i) out.data[i] = to_byte((norm[i] - lo) / (hi - lo) * 255.0);
  return out;
}

GrayImage branch_morph_gradient(const GrayImage& img, int radius) {
  if (radius < 1) throw Error(ErrorCode::InvalidArgument, "morphological radius must be >= 1");
  if (img.empty()) return GrayImage(img.width, img.height);
  const GrayImage dil = separable_rank(img, radius, [](std::uint8_t a, std::uint8_t b) { return std::max(a, b); });
  const GrayImage ero = separable_rank(img, radius, [](std::uint8_t a, std::uint8_t b) { return std::min(a, b); });
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = static_cast<std::uint8_t>(dil.data[i] - ero.data[i]);
  return out;
}

GrayImage apply_branch(BranchId branch, const GrayImage& img, const BranchParams& params) {
  switch (branch) {
    case BranchId::None: return branch_none(img);
    case BranchId::Unsharp: return branch_unsharp(img, params.unsharp_sigma, params.unsharp_amount);
    case BranchId::ScharrLcn: return branch_scharr_lcn(img, params.lcn_window, params.lcn_epsilon);
    case BranchId::MorphGradient: return branch_morph_gradient(img, params.morph_radius);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown branch code");
}

std::pair<GrayImage, GrayImage> apply_branch(BranchId branch, const GrayImage& ir, const GrayImage& vis,
                                             const BranchParams& params) {
  params.validate();
  return {apply_branch(branch, ir, params), apply_branch(branch, vis, params)};
}

GrayImage luminance_from_rgb(int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::InvalidArgument, "RGB buffer does not match width x height x 3");
  }
  GrayImage out(width, height);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = to_byte(0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2]);
  }
  return out;
}

}  // namespace cmbench
