#include "amnesia/idx.hpp"

#include "amnesia/association_matrix.hpp"
#include "amnesia/matrix_io.hpp"

#include <cmath>

namespace amnesia {

void Dataset::validate() const {
  if (height <= 0 || width <= 0) throw DataError("dataset image dimensions must be positive");
  if (images.rows() != pixels()) throw DataError("dataset pixel count does not match its dimensions");
  if (static_cast<std::size_t>(images.cols()) != labels.size()) throw DataError("dataset image and label counts differ");
}

namespace {

// IDX headers are big-endian.
class BigEndianReader {
 public:
  BigEndianReader(std::string_view bytes, const char* what) : bytes_(bytes), what_(what) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v = (v << 8) | static_cast<unsigned char>(bytes_[pos_++]);
    return v;
  }
  unsigned char u8() {
    need(1);
    return static_cast<unsigned char>(bytes_[pos_++]);
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError(std::string("truncated IDX ") + what_ + " file");
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  const char* what_;
  std::size_t pos_ = 0;
};

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

}  // namespace

Dataset parse_idx(std::string_view image_bytes, std::string_view label_bytes) {
  if (image_bytes.empty()) throw DataError("empty IDX images file");
  if (label_bytes.empty()) throw DataError("empty IDX labels file");
  BigEndianReader img(image_bytes, "images");
  BigEndianReader lab(label_bytes, "labels");
  if (img.u32() != kIdxImageMagic) throw DataError("bad IDX images magic");
  if (lab.u32() != kIdxLabelMagic) throw DataError("bad IDX labels magic");
  const std::uint32_t n = img.u32();
  const std::uint32_t rows = img.u32();
  const std::uint32_t cols = img.u32();
  const std::uint32_t n_labels = lab.u32();
  if (n != n_labels)
    throw DataError("IDX count mismatch: " + std::to_string(n) + " images, " + std::to_string(n_labels) + " labels");
  if (rows == 0 || cols == 0) throw DataError("IDX image dimensions must be positive");

  Dataset d;
  d.height = static_cast<int>(rows);
  d.width = static_cast<int>(cols);
  const std::size_t px = static_cast<std::size_t>(rows) * cols;
  img.need(px * n);
  lab.need(n);
  d.images.resize(static_cast<Eigen::Index>(px), n);
  d.labels.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < px; ++p) d.images(static_cast<Eigen::Index>(p), i) = img.u8() / 255.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    d.labels[i] = lab.u8();
    if (d.labels[i] > 9) throw DataError("IDX label " + std::to_string(d.labels[i]) + " out of range 0-9");
  }
  if (!img.at_end()) throw DataError("trailing bytes in IDX images file");
  if (!lab.at_end()) throw DataError("trailing bytes in IDX labels file");
  return d;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return parse_idx(read_file(images_path), read_file(labels_path));
}

std::string encode_idx_images(const Dataset& d) {
  d.validate();
  std::string out;
  put_u32(out, kIdxImageMagic);
  put_u32(out, static_cast<std::uint32_t>(d.size()));
  put_u32(out, static_cast<std::uint32_t>(d.height));
  put_u32(out, static_cast<std::uint32_t>(d.width));
  for (Eigen::Index i = 0; i < d.images.cols(); ++i)
    for (Eigen::Index p = 0; p < d.images.rows(); ++p)
      out.push_back(static_cast<char>(std::lround(std::clamp(d.images(p, i), 0.0, 1.0) * 255.0)));
  return out;
}

std::string encode_idx_labels(const Dataset& d) {
  d.validate();
  std::string out;
  put_u32(out, kIdxLabelMagic);
  put_u32(out, static_cast<std::uint32_t>(d.size()));
  for (int l : d.labels) out.push_back(static_cast<char>(l));
  return out;
}

}  // namespace amnesia
