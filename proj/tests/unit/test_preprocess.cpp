#include <doctest.h>

#include <filesystem>
#include <random>

#include "../support/oracles.hpp"
#include "cmbench/error.hpp"
#include "cmbench/evaluate.hpp"
#include "cmbench/image_io.hpp"
#include "cmbench/preprocess.hpp"

using namespace cmbench;

namespace {

int max_abs_diff(const GrayImage& a, const GrayImage& b) {
  int d = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(int(a.data[i]) - int(b.data[i])));
  return d;
}

GrayImage step_edge(int w, int h, int at, std::uint8_t lo, std::uint8_t hi) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) img.at(x, y) = x < at ? lo : hi;
  }
  return img;
}

}  // namespace

TEST_CASE("reflect_index is reflect-101") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(-2, 5) == 2);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(6, 5) == 2);
  CHECK(reflect_index(0, 1) == 0);
  CHECK(reflect_index(-7, 1) == 0);
  for (int n = 1; n < 9; ++n) {
    for (int i = -30; i < 30; ++i) CHECK(reflect_index(i, n) == oracle::mirror(i, n));
  }
}

TEST_CASE("rounding and kernel") {
  CHECK(to_byte(2.5) == 3);
  CHECK(to_byte(-0.5) == 0);
  CHECK(to_byte(254.5) == 255);
  CHECK(to_byte(300) == 255);
  const auto k = gaussian_kernel(1.5);
  CHECK(k.size() == 11);
  double s = 0;
  for (double v : k) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("none branch is the identity") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const GrayImage img = oracle::random_image(1 + static_cast<int>(rng() % 40), 1 + static_cast<int>(rng() % 40), rng);
    CHECK(branch_none(img) == img);
  }
  const GrayImage one(1, 1, 77);
  CHECK(apply_branch(BranchId::None, one) == one);
}

TEST_CASE("unsharp matches direct 2-D convolution") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const GrayImage img = oracle::random_image(16, 16, rng);
    CHECK(branch_unsharp(img, 1.5, 1.0) == oracle::naive_unsharp(img, 1.5, 1.0));
    CHECK(branch_unsharp(img, 0.8, 2.5) == oracle::naive_unsharp(img, 0.8, 2.5));
  }
  const GrayImage odd = oracle::random_image(5, 3, rng);
  CHECK(branch_unsharp(odd, 1.5, 1.0) == oracle::naive_unsharp(odd, 1.5, 1.0));
}

TEST_CASE("unsharp qualitative behaviour") {
  const GrayImage flat(20, 20, 90);
  CHECK(branch_unsharp(flat, 1.5, 1.0) == flat);
  const GrayImage edge = step_edge(20, 3, 10, 80, 160);
  const GrayImage out = branch_unsharp(edge, 1.5, 1.0);
  CHECK(out.at(9, 1) < 80);   // dark side undershoots
  CHECK(out.at(10, 1) > 160);  // bright side overshoots
  CHECK_THROWS_AS(branch_unsharp(edge, 0.0, 1.0), Error);
}

TEST_CASE("scharr + LCN matches windowed statistics within one level") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const GrayImage img = oracle::random_image(16, 16, rng);
    CHECK(max_abs_diff(branch_scharr_lcn(img, 15, 1.0), oracle::naive_scharr_lcn(img, 15, 1.0)) <= 1);
    CHECK(max_abs_diff(branch_scharr_lcn(img, 5, 2.0), oracle::naive_scharr_lcn(img, 5, 2.0)) <= 1);
  }
}

TEST_CASE("scharr + LCN qualitative behaviour") {
  const GrayImage flat(16, 16, 40);
  CHECK(branch_scharr_lcn(flat, 15, 1.0) == GrayImage(16, 16, 128));
  const GrayImage edge = step_edge(32, 8, 16, 0, 200);
  const GrayImage out = branch_scharr_lcn(edge, 5, 1.0);
  for (int y = 0; y < 8; ++y) {
    int best = 0;
    for (int x = 0; x < 32; ++x) {
      if (out.at(x, y) > out.at(best, y)) best = x;
    }
    CHECK((best == 15 || best == 16));
  }
  CHECK_THROWS_AS(branch_scharr_lcn(flat, 4, 1.0), Error);
}

TEST_CASE("morphological gradient matches min/max windows") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const GrayImage img = oracle::random_image(16, 16, rng);
    CHECK(branch_morph_gradient(img, 1) == oracle::naive_morph_gradient(img, 1));
    CHECK(branch_morph_gradient(img, 2) == oracle::naive_morph_gradient(img, 2));
  }
  CHECK(branch_morph_gradient(GrayImage(9, 9, 50), 1) == GrayImage(9, 9, 0));
  GrayImage dot(7, 7, 0);
  dot.at(3, 3) = 200;
  const GrayImage out = branch_morph_gradient(dot, 1);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 7; ++x) {
      const bool inside = std::abs(x - 3) <= 1 && std::abs(y - 3) <= 1;
      CHECK(out.at(x, y) == (inside ? 200 : 0));
    }
  }
}

TEST_CASE("apply_branch on a pair") {
  std::mt19937_64 rng(5);
  const GrayImage a = oracle::random_image(20, 12, rng), b = oracle::random_image(20, 12, rng);
  for (BranchId br : kAllBranches) {
    const auto [oa, ob] = apply_branch(br, a, b);
    CHECK(oa == apply_branch(br, a));
    CHECK(ob == apply_branch(br, b));
    CHECK(oa.width == a.width);
    CHECK(oa.height == a.height);
    const auto [sa, sb] = apply_branch(br, a, a);
    CHECK(sa == sb);
  }
  BranchParams bad;
  bad.morph_radius = 0;
  CHECK_THROWS_AS(apply_branch(BranchId::None, a, b, bad), Error);
}

TEST_CASE("branches are reproducible across worker counts") {
  std::mt19937_64 rng(6);
  std::vector<GrayImage> imgs;
  for (int i = 0; i < 24; ++i) imgs.push_back(oracle::random_image(24, 18, rng));
  for (BranchId br : kAllBranches) {
    std::vector<GrayImage> one(imgs.size()), many(imgs.size());
    parallel_for(imgs.size(), 1, [&](std::size_t i) { one[i] = apply_branch(br, imgs[i]); });
    parallel_for(imgs.size(), 8, [&](std::size_t i) { many[i] = apply_branch(br, imgs[i]); });
    CHECK(one == many);
  }
}

TEST_CASE("branch names and codes") {
  for (BranchId b : kAllBranches) {
    CHECK(branch_from_name(branch_name(b)) == b);
    CHECK(branch_from_code(branch_code(b)) == b);
  }
  CHECK_FALSE(branch_from_code(4).has_value());
  CHECK_FALSE(branch_from_name("clahe").has_value());
}

TEST_CASE("luminance conversion and image IO") {
  const std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 10, 10};
  const GrayImage g = luminance_from_rgb(2, 2, rgb);
  CHECK(g.data == std::vector<std::uint8_t>{76, 150, 29, 10});

  std::mt19937_64 rng(7);
  const GrayImage img = oracle::random_image(13, 7, rng);
  const auto path = std::filesystem::temp_directory_path() / "cmbench_io_test.png";
  save_png(path, img);
  CHECK(load_gray_image(path) == img);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_gray_image("/nonexistent/image.png"), Error);
}
