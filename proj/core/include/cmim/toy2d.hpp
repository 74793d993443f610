#pragma once

// Gradient descent on the pure contrastive term over free 2D points, with
// angle/radius statistics at selected steps.

#include <filesystem>
#include <vector>

#include "cmim/datasets.hpp"

namespace cmim {

inline constexpr int kAngleBins = 36;
inline constexpr int kRadiusBins = 20;

struct ToySnapshot {
  long step = 0;
  Matrix points;                    // N x 2
  std::vector<int> angle_hist;      // 36 bins over (-pi, pi]
  std::vector<int> radius_hist;     // 20 bins over [0, max radius]
  double radius_max = 0.0;
  double resultant_length = 0.0;    // R̄ of the angles
  double radius_cv = 0.0;           // std / mean of radii
  double loss = 0.0;                // mean contrastive loss at this step
};

struct ToyTrajectory {
  std::vector<ToySnapshot> snapshots;
};

struct ToyConfig {
  long steps = 4200;
  double lr = 50.0;
  double tau = 1.0;
  std::vector<long> snapshot_steps{0, 200, 400};  // the final step is always added
};

/// Mean contrastive loss over a 2D point set and its gradient with respect to
/// the points, computed anchor by anchor without forming the B x B logit
/// matrix. Agrees with cmim_latent_loss_and_grad.
class ToyStepper {
 public:
  explicit ToyStepper(double tau);
  double loss_and_grad(const Matrix& z, Matrix& grad);

 private:
  double tau_;
  Eigen::ArrayXd ux_, uy_;
  Vector col_, dux_, duy_;
};

/// Full-batch gradient descent on the mean of -log p_{k=1} over all points.
/// Throws DivergenceError carrying the step index on a non-finite point.
ToyTrajectory run_toy(const ToySet2D& points, const ToyConfig& config = {});

/// Mean resultant length ||(mean cos, mean sin)|| in [0, 1].
double circular_uniformity(const std::vector<double>& angles);

std::vector<double> point_angles(const Matrix& points);
std::vector<double> point_radii(const Matrix& points);

ToySnapshot make_snapshot(long step, const Matrix& points, double loss);

/// Per-snapshot CSV (x,y,angle,radius) and an SVG with scatter, angle
/// histogram and radius histogram side by side. Returns written paths.
std::vector<std::filesystem::path> write_toy_outputs(const ToyTrajectory& trajectory,
                                                     const std::filesystem::path& out_dir);

}  // namespace cmim
