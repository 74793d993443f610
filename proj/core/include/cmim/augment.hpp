#pragma once

// Random affine augmentation of square single-channel images: rotation,
// translation, scale and x-shear about the image centre, resampled by
// inverse mapping with bilinear interpolation and zero fill.

#include "cmim/nn.hpp"

namespace cmim {

struct AffineAugmentConfig {
  double max_degrees = 15.0;
  double translate_x = 0.1;  // fraction of the image side
  double translate_y = 0.1;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double max_shear = 10.0;  // degrees
};

struct AffineParams {
  double angle_deg = 0.0;
  double tx = 0.0;  // pixels, columns
  double ty = 0.0;  // pixels, rows
  double scale = 1.0;
  double shear_deg = 0.0;
};

/// Translations are rounded to whole pixels.
AffineParams sample_affine(const AffineAugmentConfig& config, int side, Rng& rng);

/// `image` is row-major side x side.
Vector apply_affine(const Vector& image, int side, const AffineParams& params);

Vector affine_augment(const Vector& image, int side, const AffineAugmentConfig& config, Rng& rng);

/// Augments every row of a batch independently.
Matrix augment_rows(const Matrix& images, int side, const AffineAugmentConfig& config, Rng& rng);

}  // namespace cmim
