#pragma once

// Minimal SVG writers for the toy snapshots, probe accuracy bars and the
// slope distributions. Output is plain text and byte-stable.

#include <string>
#include <vector>

namespace cmim {

struct ToySnapshot;

/// Shortest round-trippable-enough text for CSV/SVG output ("%.10g").
std::string format_number(double v);

/// Scatter, angle histogram and radius histogram side by side.
std::string toy_snapshot_svg(const ToySnapshot& snapshot);

struct BarSeries {
  std::string name;
  std::vector<double> mean;   // one per category
  std::vector<double> error;  // half-width of the error bar
};

/// Grouped bars with error bars; NaN means are drawn as gaps.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series, const std::string& y_label);

struct SlopeGroup {
  std::string name;
  std::vector<double> slopes;
};

/// One strip of points per group plus its mean marker and a zero line.
std::string slope_distribution_svg(const std::string& title, const std::vector<SlopeGroup>& groups);

}  // namespace cmim
