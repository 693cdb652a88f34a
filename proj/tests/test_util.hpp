#pragma once

#include "amnesia/association_matrix.hpp"
#include "amnesia/random.hpp"

#include <filesystem>
#include <string>

namespace amnesia::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto base = std::getenv("AMNESIA_TEST_TMP") ? std::filesystem::path(std::getenv("AMNESIA_TEST_TMP"))
                                                    : std::filesystem::temp_directory_path() / "amnesia_tests";
  const auto dir = base / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sd = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, sd);
  return m;
}

// A * B^T plus noise scaled to `noise_ratio` of the signal's RMS.
inline Eigen::MatrixXd planted(Eigen::Index m, Eigen::Index n, int rank, double noise_ratio, Rng& rng) {
  const Eigen::MatrixXd signal = gaussian(m, rank, rng) * gaussian(n, rank, rng).transpose();
  const double rms = std::sqrt(signal.squaredNorm() / static_cast<double>(signal.size()));
  return signal + gaussian(m, n, rng, noise_ratio * rms);
}

inline double relative_difference(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace amnesia::testing
