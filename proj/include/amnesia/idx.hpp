#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace amnesia {

/// Labelled grayscale images, one column of pixels (row-major, scaled to
/// [0, 1]) per example.
struct Dataset {
  Eigen::MatrixXd images;  // (height*width) x n
  std::vector<int> labels;
  int height = 0;
  int width = 0;

  std::size_t size() const { return labels.size(); }
  int pixels() const { return height * width; }
  void validate() const;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
Dataset parse_idx(std::string_view image_bytes, std::string_view label_bytes);

// Writers for fixtures; pixels are quantized to bytes with round(255 * v).
std::string encode_idx_images(const Dataset& d);
std::string encode_idx_labels(const Dataset& d);

}  // namespace amnesia
