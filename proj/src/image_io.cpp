#include "cmbench/image_io.hpp"

#include <algorithm>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "cmbench/error.hpp"

namespace cmbench {

GrayImage load_gray_image(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw Error(ErrorCode::IoError, "cannot decode image " + path.string());
  if (raw.depth() == CV_16U) {
    raw.convertTo(raw, CV_8U, 1.0 / 257.0);
  } else if (raw.depth() != CV_8U) {
    throw Error(ErrorCode::IoError, "unsupported sample depth in " + path.string());
  }

  const int w = raw.cols;
  const int h = raw.rows;
  const int channels = raw.channels();
  if (channels == 1) {
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
      const auto* row = raw.ptr<std::uint8_t>(y);
      std::copy(row, row + w, out.data.begin() + static_cast<std::ptrdiff_t>(y) * w);
    }
    return out;
  }
  if (channels != 3 && channels != 4) {
    throw Error(ErrorCode::IoError, "unsupported channel count in " + path.string());
  }
  // OpenCV decodes colour as BGR(A).
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    const auto* row = raw.ptr<std::uint8_t>(y);
    for (int x = 0; x < w; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
      rgb[o] = row[x * channels + 2];
      rgb[o + 1] = row[x * channels + 1];
      rgb[o + 2] = row[x * channels];
    }
  }
  return luminance_from_rgb(w, h, rgb);
}

void save_png(const std::filesystem::path& path, const GrayImage& img) {
  cv::Mat m(img.height, img.width, CV_8UC1, const_cast<std::uint8_t*>(img.data.data()));
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::IoError, "cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

}  // namespace cmbench
