#include "cmim/augment.hpp"

#include <numbers>

namespace cmim {

AffineParams sample_affine(const AffineAugmentConfig& config, int side, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  AffineParams p;
  p.angle_deg = uniform(-config.max_degrees, config.max_degrees);
  const double max_dx = config.translate_x * side;
  const double max_dy = config.translate_y * side;
  p.tx = std::round(uniform(-max_dx, max_dx));
  p.ty = std::round(uniform(-max_dy, max_dy));
  p.scale = uniform(config.scale_min, config.scale_max);
  p.shear_deg = uniform(-config.max_shear, config.max_shear);
  return p;
}

Vector apply_affine(const Vector& image, int side, const AffineParams& params) {
  if (image.size() != static_cast<Eigen::Index>(side) * side) {
    throw ContractViolation("apply_affine: image is not side x side");
  }
  const double deg = std::numbers::pi / 180.0;
  const double a = params.angle_deg * deg;
  const double sh = std::tan(params.shear_deg * deg);
  // Forward linear part: scale * R(a) * [[1, sh], [0, 1]].
  const double m00 = params.scale * std::cos(a);
  const double m01 = params.scale * (std::cos(a) * sh - std::sin(a));
  const double m10 = params.scale * std::sin(a);
  const double m11 = params.scale * (std::sin(a) * sh + std::cos(a));
  const double det = m00 * m11 - m01 * m10;
  const double i00 = m11 / det, i01 = -m01 / det, i10 = -m10 / det, i11 = m00 / det;

  const double c = 0.5 * (side - 1);
  auto pixel = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= side || y >= side) return 0.0;
    return image[y * side + x];
  };

  Vector out(image.size());
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double vx = x - c - params.tx;
      const double vy = y - c - params.ty;
      const double sx = i00 * vx + i01 * vy + c;
      const double sy = i10 * vx + i11 * vy + c;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
      const double wx = sx - fx, wy = sy - fy;
      double v = 0.0;
      // Skip zero-weight taps so integer positions reproduce the input exactly.
      if ((1 - wx) * (1 - wy) != 0.0) v += (1 - wx) * (1 - wy) * pixel(x0, y0);
      if (wx * (1 - wy) != 0.0) v += wx * (1 - wy) * pixel(x0 + 1, y0);
      if ((1 - wx) * wy != 0.0) v += (1 - wx) * wy * pixel(x0, y0 + 1);
      if (wx * wy != 0.0) v += wx * wy * pixel(x0 + 1, y0 + 1);
      out[y * side + x] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

Vector affine_augment(const Vector& image, int side, const AffineAugmentConfig& config, Rng& rng) {
  return apply_affine(image, side, sample_affine(config, side, rng));
}

Matrix augment_rows(const Matrix& images, int side, const AffineAugmentConfig& config, Rng& rng) {
  Matrix out(images.rows(), images.cols());
  for (Eigen::Index r = 0; r < images.rows(); ++r) {
    out.row(r) = affine_augment(images.row(r).transpose(), side, config, rng).transpose();
  }
  return out;
}

}  // namespace cmim
