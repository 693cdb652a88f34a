#include "amnesia/rotation.hpp"

#include "amnesia/random.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace amnesia {

Eigen::VectorXd rotate_image(const Eigen::VectorXd& image, int height, int width, double degrees,
                             Interpolation interp) {
  if (image.size() != static_cast<Eigen::Index>(height) * width)
    throw std::invalid_argument("image size does not match its dimensions");
  double turn = std::fmod(degrees, 360.0);
  if (turn == 0.0) return image;
  if (turn < 0.0) turn += 360.0;

  const double rad = turn * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double cy = (height - 1) / 2.0;
  const double cx = (width - 1) / 2.0;
  auto at = [&](int r, int col) -> double {
    if (r < 0 || r >= height || col < 0 || col >= width) return 0.0;
    return image[static_cast<Eigen::Index>(r) * width + col];
  };

  Eigen::VectorXd out(image.size());
  for (int r = 0; r < height; ++r) {
    for (int col = 0; col < width; ++col) {
      // Inverse map with the y axis pointing up on screen.
      const double dx = col - cx;
      const double dy = cy - r;
      const double sx = c * dx + s * dy;
      const double sy = -s * dx + c * dy;
      const double src_col = cx + sx;
      const double src_row = cy - sy;
      double v;
      if (interp == Interpolation::Nearest) {
        v = at(static_cast<int>(std::lround(src_row)), static_cast<int>(std::lround(src_col)));
      } else {
        const double fr = std::floor(src_row);
        const double fc = std::floor(src_col);
        const double ar = src_row - fr;
        const double ac = src_col - fc;
        const int r0 = static_cast<int>(fr);
        const int c0 = static_cast<int>(fc);
        v = (1 - ar) * ((1 - ac) * at(r0, c0) + ac * at(r0, c0 + 1)) +
            ar * ((1 - ac) * at(r0 + 1, c0) + ac * at(r0 + 1, c0 + 1));
      }
      out[static_cast<Eigen::Index>(r) * width + col] = v;
    }
  }
  return out;
}

RotationTask make_rotated(const Dataset& base, double angle, std::size_t n, std::uint64_t seed,
                          Interpolation interp) {
  if (std::abs(angle) > 180.0) throw std::invalid_argument("rotation angle must lie in [-180, 180]");
  if (n > base.size())
    throw std::invalid_argument("task size " + std::to_string(n) + " exceeds base dataset of " +
                                std::to_string(base.size()));
  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(base.size(), n);
  RotationTask task;
  task.angle = angle;
  task.data.height = base.height;
  task.data.width = base.width;
  task.data.images.resize(base.images.rows(), static_cast<Eigen::Index>(n));
  task.data.labels.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(picks[k]);
    task.data.images.col(static_cast<Eigen::Index>(k)) =
        rotate_image(base.images.col(i), base.height, base.width, angle, interp);
    task.data.labels[k] = base.labels[picks[k]];
  }
  return task;
}

}  // namespace amnesia
