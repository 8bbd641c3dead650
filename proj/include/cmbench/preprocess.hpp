#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace cmbench {

/// Row-major 8-bit luminance image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0);
  GrayImage(int w, int h, std::vector<std::uint8_t> pixels);

  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  bool empty() const { return data.empty(); }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Codes are the training-label order of the gate classifier.
enum class BranchId : int { None = 0, Unsharp = 1, ScharrLcn = 2, MorphGradient = 3 };

inline constexpr std::array<BranchId, 4> kAllBranches{BranchId::None, BranchId::Unsharp, BranchId::ScharrLcn,
                                                      BranchId::MorphGradient};
inline constexpr std::size_t kBranchCount = kAllBranches.size();

constexpr int branch_code(BranchId b) { return static_cast<int>(b); }
std::optional<BranchId> branch_from_code(long long code);
std::string_view branch_name(BranchId b);
std::optional<BranchId> branch_from_name(std::string_view name);

struct BranchParams {
  double unsharp_sigma = 1.5;
  double unsharp_amount = 1.0;
  int lcn_window = 15;
  double lcn_epsilon = 1.0;
  int morph_radius = 1;

  /// Throws InvalidArgument for sigma <= 0, even or < 3 LCN windows, radius < 1.
  void validate() const;
  friend bool operator==(const BranchParams&, const BranchParams&) = default;
};

/// Reflect-101 border index (…2 1 | 0 1 2 … n-1 | n-2 …), valid for any n >= 1.
int reflect_index(int i, int n);

/// Normalized 1-D Gaussian with radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Round half away from zero, then clamp to [0, 255].
std::uint8_t to_byte(double v);

GrayImage branch_none(const GrayImage& img);
GrayImage branch_unsharp(const GrayImage& img, double sigma = 1.5, double amount = 1.0);
GrayImage branch_scharr_lcn(const GrayImage& img, int lcn_window = 15, double epsilon = 1.0);
GrayImage branch_morph_gradient(const GrayImage& img, int radius = 1);

GrayImage apply_branch(BranchId branch, const GrayImage& img, const BranchParams& params = {});
std::pair<GrayImage, GrayImage> apply_branch(BranchId branch, const GrayImage& ir, const GrayImage& vis,
                                             const BranchParams& params = {});

/// BT.601 luma from interleaved 8-bit RGB.
GrayImage luminance_from_rgb(int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace cmbench
