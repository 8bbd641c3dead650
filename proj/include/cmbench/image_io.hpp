#pragma once

#include <filesystem>

#include "cmbench/preprocess.hpp"

namespace cmbench {

/// Decodes PNG or TIFF. Colour inputs are reduced to BT.601 luma; 16-bit
/// samples are scaled to 8 bits. Throws IoError.
GrayImage load_gray_image(const std::filesystem::path& path);

/// Throws IoError when the file cannot be written.
void save_png(const std::filesystem::path& path, const GrayImage& img);

}  // namespace cmbench
