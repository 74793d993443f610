#include "cmim/toy2d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "cmim/contrastive.hpp"
#include "cmim/svg.hpp"

namespace cmim {

double circular_uniformity(const std::vector<double>& angles) {
  if (angles.empty()) throw DomainError("circular_uniformity of no angles");
  double c = 0.0, s = 0.0;
  for (double a : angles) {
    c += std::cos(a);
    s += std::sin(a);
  }
  const auto n = static_cast<double>(angles.size());
  return std::min(1.0, std::hypot(c / n, s / n));
}

std::vector<double> point_angles(const Matrix& points) {
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = std::atan2(points(i, 1), points(i, 0));
  }
  return out;
}

std::vector<double> point_radii(const Matrix& points) {
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = points.row(i).norm();
  }
  return out;
}

ToySnapshot make_snapshot(long step, const Matrix& points, double loss) {
  ToySnapshot s;
  s.step = step;
  s.points = points;
  s.loss = loss;
  const auto angles = point_angles(points);
  const auto radii = point_radii(points);
  s.resultant_length = circular_uniformity(angles);

  s.angle_hist.assign(kAngleBins, 0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (double a : angles) {
    // (-pi, pi] -> bins of width 2 pi / 36, right-closed.
    int bin = static_cast<int>(std::ceil((a + std::numbers::pi) / two_pi * kAngleBins)) - 1;
    s.angle_hist[static_cast<std::size_t>(std::clamp(bin, 0, kAngleBins - 1))]++;
  }

  s.radius_max = radii.empty() ? 0.0 : *std::max_element(radii.begin(), radii.end());
  s.radius_hist.assign(kRadiusBins, 0);
  double mean = 0.0;
  for (double r : radii) {
    mean += r;
    const int bin = s.radius_max > 0.0 ? static_cast<int>(r / s.radius_max * kRadiusBins) : 0;
    s.radius_hist[static_cast<std::size_t>(std::clamp(bin, 0, kRadiusBins - 1))]++;
  }
  mean /= static_cast<double>(radii.size());
  double var = 0.0;
  for (double r : radii) var += (r - mean) * (r - mean);
  var /= static_cast<double>(radii.size());
  s.radius_cv = std::sqrt(var) / mean;
  return s;
}

ToyStepper::ToyStepper(double tau) : tau_(tau) {
  if (!(tau > 0.0)) throw ContractViolation("ToyStepper: tau must be > 0");
}

double ToyStepper::loss_and_grad(const Matrix& z, Matrix& grad) {
  if (z.cols() != 2 || z.rows() < 2) throw ContractViolation("ToyStepper expects B >= 2 points in 2D");
  const Eigen::Index b = z.rows();
  const Vector norms = z.rowwise().norm();
  if (!(norms.minCoeff() > 0.0)) throw DomainError("toy point at the origin has no direction");
  ux_ = z.col(0).cwiseQuotient(norms);
  uy_ = z.col(1).cwiseQuotient(norms);
  dux_.setZero(b);
  duy_.setZero(b);
  col_.resize(b);

  const double offset = std::log(static_cast<double>(b - 1));
  const double inv_tau = 1.0 / tau_;
  double loss_sum = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    // Row i of the logits and, after the update below, of dℓ_i/ds.
    col_ = ((ux_ * ux_[i] + uy_ * uy_[i]).cwiseMax(-1.0).cwiseMin(1.0) * inv_tau).matrix();
    const double positive = col_[i];
    col_[i] = -std::numeric_limits<double>::infinity();
    const double shift = col_.maxCoeff();
    col_ = (col_.array() - shift).exp().matrix();
    const double denom = col_.sum();
    const double margin = positive - (shift + std::log(denom) - offset);
    const double p = sigmoid(margin);
    loss_sum += softplus(-margin);
    col_ *= (1.0 - p) / denom;
    col_[i] = p - 1.0;
    // s_ij depends on u_i and u_j: d/du_i += g_ij u_j, d/du_j += g_ij u_i.
    dux_[i] += col_.dot(ux_.matrix());
    duy_[i] += col_.dot(uy_.matrix());
    dux_ += (col_.array() * ux_[i]).matrix();
    duy_ += (col_.array() * uy_[i]).matrix();
  }
  const double scale = inv_tau / static_cast<double>(b);
  grad.resize(b, 2);
  for (Eigen::Index j = 0; j < b; ++j) {
    const double gx = dux_[j] * scale, gy = duy_[j] * scale;
    const double radial = gx * ux_[j] + gy * uy_[j];
    grad(j, 0) = (gx - radial * ux_[j]) / norms[j];
    grad(j, 1) = (gy - radial * uy_[j]) / norms[j];
  }
  return loss_sum / static_cast<double>(b);
}

ToyTrajectory run_toy(const ToySet2D& set, const ToyConfig& config) {
  if (set.points.cols() != 2 || set.points.rows() < 2) {
    throw ContractViolation("run_toy expects at least two 2D points");
  }
  if (config.steps < 0 || !(config.lr > 0.0)) throw ContractViolation("run_toy: bad schedule");
  const SimilarityConfig sim(config.tau);
  std::vector<long> marks = config.snapshot_steps;
  marks.push_back(config.steps);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  ToyTrajectory traj;
  ToyStepper stepper(sim.tau());
  Matrix z = set.points;
  Matrix grad;
  std::size_t next = 0;
  for (long step = 0;; ++step) {
    const double loss = stepper.loss_and_grad(z, grad);
    while (next < marks.size() && marks[next] == step) {
      traj.snapshots.push_back(make_snapshot(step, z, loss));
      ++next;
    }
    if (step >= config.steps) break;
    z -= config.lr * grad;
    // A point that overflows or collapses onto the origin has no direction left.
    const Vector norms = z.rowwise().norm();
    if (!z.allFinite() || !norms.allFinite() || !(norms.minCoeff() > 0.0)) {
      throw DivergenceError("toy2d diverged", step + 1);
    }
  }
  return traj;
}

std::vector<std::filesystem::path> write_toy_outputs(const ToyTrajectory& trajectory,
                                                     const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& snap : trajectory.snapshots) {
    const std::string stem = "toy2d_step" + std::to_string(snap.step);
    const auto csv_path = out_dir / (stem + ".csv");
    std::ofstream csv(csv_path);
    csv << "x,y,angle,radius\n";
    const auto angles = point_angles(snap.points);
    const auto radii = point_radii(snap.points);
    for (Eigen::Index i = 0; i < snap.points.rows(); ++i) {
      csv << format_number(snap.points(i, 0)) << ',' << format_number(snap.points(i, 1)) << ','
          << format_number(angles[static_cast<std::size_t>(i)]) << ','
          << format_number(radii[static_cast<std::size_t>(i)]) << '\n';
    }
    written.push_back(csv_path);

    const auto svg_path = out_dir / (stem + ".svg");
    std::ofstream svg(svg_path);
    svg << toy_snapshot_svg(snap);
    written.push_back(svg_path);
  }

  const auto summary = out_dir / "toy2d_summary.csv";
  std::ofstream s(summary);
  s << "step,loss,resultant_length,radius_cv\n";
  for (const auto& snap : trajectory.snapshots) {
    s << snap.step << ',' << format_number(snap.loss) << ','
      << format_number(snap.resultant_length) << ',' << format_number(snap.radius_cv) << '\n';
  }
  written.push_back(summary);
  return written;
}

}  // namespace cmim
