#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cmbench/error.hpp"
#include "cmbench/gate.hpp"
#include "json_util.hpp"

namespace cmbench {

namespace {

constexpr int kCellSize = kEmbedInputSize / kEmbedGrid;

}  // namespace

std::vector<double> resize_bilinear(const GrayImage& img, int out_width, int out_height) {
  if (img.empty() || out_width <= 0 || out_height <= 0) {
    throw Error(ErrorCode::InvalidArgument, "cannot resize an empty image");
  }
  const double sx = static_cast<double>(img.width) / out_width;
  const double sy = static_cast<double>(img.height) / out_height;
  std::vector<double> out(static_cast<std::size_t>(out_width) * out_height);
  for (int y = 0; y < out_height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ay = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double ax = fx - x0;
      // Difference form keeps constant regions exactly constant.
      const double p00 = img.at(x0, y0);
      const double p01 = img.at(x1, y0);
      const double p10 = img.at(x0, y1);
      const double p11 = img.at(x1, y1);
      const double top = p00 + ax * (p01 - p00);
      const double bottom = p10 + ax * (p11 - p10);
      out[static_cast<std::size_t>(y) * out_width + x] = top + ay * (bottom - top);
    }
  }
  return out;
}

EmbeddingVector GridOrientationProvider::embed(std::string_view image_id, const GrayImage* image) const {
  if (image == nullptr || image->empty()) {
    throw Error(ErrorCode::InvalidArgument, "builtin provider needs pixels for '" + std::string(image_id) + "'");
  }
  const int n = kEmbedInputSize;
  const std::vector<double> r = resize_bilinear(*image, n, n);
  auto at = [&](int x, int y) {
    return r[static_cast<std::size_t>(std::clamp(y, 0, n - 1)) * n + std::clamp(x, 0, n - 1)];
  };

  EmbeddingVector out(kBuiltinEmbeddingDim, 0.0);
  const double cell_area = static_cast<double>(kCellSize) * kCellSize;
  for (int cy = 0; cy < kEmbedGrid; ++cy) {
    for (int cx = 0; cx < kEmbedGrid; ++cx) {
      double* cell = out.data() + static_cast<std::size_t>(cy * kEmbedGrid + cx) * (kEmbedOrientationBins + 2);
      const int x0 = cx * kCellSize;
      const int y0 = cy * kCellSize;
      double sum = 0.0;
      for (int y = y0; y < y0 + kCellSize; ++y) {
        for (int x = x0; x < x0 + kCellSize; ++x) {
          sum += at(x, y);
          const double gx = at(x + 1, y) - at(x - 1, y);
          const double gy = at(x, y + 1) - at(x, y - 1);
          const double mag = std::hypot(gx, gy);
          if (mag == 0.0) continue;
          const double angle = std::atan2(gy, gx) + std::numbers::pi;
          int bin = static_cast<int>(angle / (2.0 * std::numbers::pi) * kEmbedOrientationBins);
          if (bin >= kEmbedOrientationBins) bin = kEmbedOrientationBins - 1;
          cell[bin] += mag;
        }
      }
      const double mean = sum / cell_area;
      // Second pass keeps the std of a constant cell exactly zero.
      double sq = 0.0;
      for (int y = y0; y < y0 + kCellSize; ++y) {
        for (int x = x0; x < x0 + kCellSize; ++x) sq += (at(x, y) - mean) * (at(x, y) - mean);
      }
      for (int b = 0; b < kEmbedOrientationBins; ++b) cell[b] /= cell_area;
      cell[kEmbedOrientationBins] = mean;
      cell[kEmbedOrientationBins + 1] = std::sqrt(sq / cell_area);
    }
  }
  return out;
}

ExternalEmbeddingProvider ExternalEmbeddingProvider::from_stream(std::istream& in, const std::string& source) {
  ExternalEmbeddingProvider p;
  std::string line;
  detail::Where w{source, 0};
  while (std::getline(in, line)) {
    ++w.line;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = detail::parse_line(line, w);
    detail::check_schema(j, kEmbeddingSchema, w);
    const std::string image_id = detail::get_nonempty_string(j, "image_id", w);
    const std::string provider = detail::get_nonempty_string(j, "provider", w);
    const auto dim = detail::get_unsigned(j, "dim", w);
    std::vector<double> values = detail::get_number_array(j, "values", w);
    if (values.size() != dim || dim == 0) {
      throw Error(ErrorCode::DimensionMismatch, w.prefix() + "declared dim " + std::to_string(dim) + " but " +
                                                    std::to_string(values.size()) + " values");
    }
    if (p.vectors_.empty()) {
      p.provider_ = provider;
      p.dim_ = values.size();
    } else if (provider != p.provider_) {
      detail::schema_error(w, "provider", "mixes providers '" + p.provider_ + "' and '" + provider + "'");
    } else if (values.size() != p.dim_) {
      throw Error(ErrorCode::DimensionMismatch, w.prefix() + "dimension differs from earlier records");
    }
    if (!p.vectors_.emplace(image_id, std::move(values)).second) {
      throw Error(ErrorCode::DuplicateId, w.prefix() + "duplicate image_id '" + image_id + "'");
    }
  }
  return p;
}

ExternalEmbeddingProvider ExternalEmbeddingProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open embedding file " + path.string());
  return from_stream(in, path.string());
}

EmbeddingVector ExternalEmbeddingProvider::embed(std::string_view image_id, const GrayImage*) const {
  auto it = vectors_.find(image_id);
  if (it == vectors_.end()) {
    throw Error(ErrorCode::InvalidArgument, "no embedding for image '" + std::string(image_id) + "'");
  }
  return it->second;
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view name, const std::filesystem::path& file) {
  if (name == "builtin" || name == kBuiltinProviderId) return std::make_unique<GridOrientationProvider>();
  if (name == "external") {
    return std::make_unique<ExternalEmbeddingProvider>(ExternalEmbeddingProvider::from_file(file));
  }
  throw Error(ErrorCode::UnknownProvider, "unknown embedding provider '" + std::string(name) + "'");
}

nlohmann::json embedding_to_json(const EmbeddingRecord& rec) {
  return {{"schema", kEmbeddingSchema},
          {"image_id", rec.image_id},
          {"provider", rec.provider},
          {"dim", rec.values.size()},
          {"values", rec.values}};
}

std::vector<double> fuse(const EmbeddingVector& f_ir, const EmbeddingVector& f_vis) {
  if (f_ir.size() != f_vis.size()) {
    throw Error(ErrorCode::DimensionMismatch, "embeddings differ in dimension: " + std::to_string(f_ir.size()) +
                                                  " vs " + std::to_string(f_vis.size()));
  }
  const std::size_t d = f_ir.size();
  std::vector<double> out(4 * d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i] = f_ir[i];
    out[d + i] = f_vis[i];
    out[2 * d + i] = std::abs(f_ir[i] - f_vis[i]);
    out[3 * d + i] = f_ir[i] * f_vis[i];
  }
  return out;
}

}  // namespace cmbench
