#pragma once

#include "amnesia/idx.hpp"

#include <cstdint>

namespace amnesia {

enum class Interpolation { Bilinear, Nearest };

// Rotates a row-major height x width image counterclockwise (as displayed)
// by `degrees` about its center. Pixels whose source falls outside the
// image are zero. Angles that are multiples of 360 return the input as is.
Eigen::VectorXd rotate_image(const Eigen::VectorXd& image, int height, int width, double degrees,
                             Interpolation interp = Interpolation::Bilinear);

struct RotationTask {
  double angle = 0.0;
  Dataset data;
};

// Draws n distinct examples of `base` (seeded) and rotates each by `angle`.
RotationTask make_rotated(const Dataset& base, double angle, std::size_t n, std::uint64_t seed,
                          Interpolation interp = Interpolation::Bilinear);

}  // namespace amnesia
