#include "cmim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "cmim/toy2d.hpp"

namespace cmim {
namespace {

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

const char* colour(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string f(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void header(std::ostringstream& o, int w, int h) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void text(std::ostringstream& o, double x, double y, const std::string& s,
          const char* anchor = "middle", int size = 11) {
  o << "<text x=\"" << f(x) << "\" y=\"" << f(y) << "\" text-anchor=\"" << anchor
    << "\" font-size=\"" << size << "\">" << escape(s) << "</text>\n";
}

void histogram(std::ostringstream& o, const std::vector<int>& counts, double x0, double y0,
               double w, double h, const std::string& title, const std::string& lo,
               const std::string& hi) {
  const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
  const double bw = w / static_cast<double>(counts.size());
  o << "<rect x=\"" << f(x0) << "\" y=\"" << f(y0) << "\" width=\"" << f(w) << "\" height=\""
    << f(h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double bh = h * counts[i] / peak;
    o << "<rect x=\"" << f(x0 + bw * static_cast<double>(i)) << "\" y=\"" << f(y0 + h - bh)
      << "\" width=\"" << f(bw * 0.9) << "\" height=\"" << f(bh) << "\" fill=\"#1f77b4\"/>\n";
  }
  text(o, x0 + w / 2, y0 - 8, title);
  text(o, x0, y0 + h + 14, lo, "start");
  text(o, x0 + w, y0 + h + 14, hi, "end");
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string toy_snapshot_svg(const ToySnapshot& s) {
  std::ostringstream o;
  const double panel = 260.0, pad = 40.0;
  header(o, static_cast<int>(3 * panel + 4 * pad), static_cast<int>(panel + 2 * pad + 20));

  text(o, (3 * panel + 4 * pad) / 2, 18,
       "step " + std::to_string(s.step) + "   R=" + format_number(s.resultant_length) +
           "   radius CV=" + format_number(s.radius_cv),
       "middle", 13);

  // Scatter on a symmetric square window.
  double extent = 1e-12;
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    extent = std::max({extent, std::abs(s.points(i, 0)), std::abs(s.points(i, 1))});
  }
  extent *= 1.05;
  const double x0 = pad, y0 = pad + 10;
  o << "<rect x=\"" << f(x0) << "\" y=\"" << f(y0) << "\" width=\"" << f(panel)
    << "\" height=\"" << f(panel) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  o << "<line x1=\"" << f(x0) << "\" y1=\"" << f(y0 + panel / 2) << "\" x2=\"" << f(x0 + panel)
    << "\" y2=\"" << f(y0 + panel / 2) << "\" stroke=\"#ccc\"/>\n";
  o << "<line x1=\"" << f(x0 + panel / 2) << "\" y1=\"" << f(y0) << "\" x2=\"" << f(x0 + panel / 2)
    << "\" y2=\"" << f(y0 + panel) << "\" stroke=\"#ccc\"/>\n";
  for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
    const double px = x0 + panel / 2 + s.points(i, 0) / extent * panel / 2;
    const double py = y0 + panel / 2 - s.points(i, 1) / extent * panel / 2;
    o << "<circle cx=\"" << f(px) << "\" cy=\"" << f(py)
      << "\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.6\"/>\n";
  }
  text(o, x0 + panel / 2, y0 - 8, "latent points");

  histogram(o, s.angle_hist, x0 + panel + pad, y0, panel, panel, "angle", "-pi", "pi");
  histogram(o, s.radius_hist, x0 + 2 * (panel + pad), y0, panel, panel, "radius", "0",
            format_number(s.radius_max));
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series, const std::string& y_label) {
  const double pad_l = 60, pad_r = 150, pad_t = 40, pad_b = 90, plot_h = 300;
  const double group_w = 30.0 * static_cast<double>(std::max<std::size_t>(series.size(), 1)) + 20;
  const double plot_w = group_w * static_cast<double>(std::max<std::size_t>(categories.size(), 1));
  std::ostringstream o;
  header(o, static_cast<int>(pad_l + plot_w + pad_r), static_cast<int>(pad_t + plot_h + pad_b));
  text(o, pad_l + plot_w / 2, 20, title, "middle", 13);

  double lo = 0.0, hi = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.mean.size(); ++i) {
      if (!std::isfinite(s.mean[i])) continue;
      const double e = i < s.error.size() && std::isfinite(s.error[i]) ? s.error[i] : 0.0;
      lo = std::min(lo, s.mean[i] - e);
      hi = std::max(hi, s.mean[i] + e);
    }
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const auto y_of = [&](double v) { return pad_t + plot_h * (hi - v) / (hi - lo); };

  o << "<line x1=\"" << f(pad_l) << "\" y1=\"" << f(y_of(0)) << "\" x2=\"" << f(pad_l + plot_w)
    << "\" y2=\"" << f(y_of(0)) << "\" stroke=\"#444\"/>\n";
  o << "<line x1=\"" << f(pad_l) << "\" y1=\"" << f(pad_t) << "\" x2=\"" << f(pad_l)
    << "\" y2=\"" << f(pad_t + plot_h) << "\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    text(o, pad_l - 4, y_of(v) + 4, format_number(std::round(v * 1000) / 1000), "end");
  }
  o << "<text transform=\"translate(14," << f(pad_t + plot_h / 2)
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";

  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = pad_l + group_w * static_cast<double>(c) + 10;
    for (std::size_t si = 0; si < series.size(); ++si) {
      const auto& s = series[si];
      if (c >= s.mean.size() || !std::isfinite(s.mean[c])) continue;
      const double x = gx + 30.0 * static_cast<double>(si);
      const double top = std::min(y_of(s.mean[c]), y_of(0)), bottom = std::max(y_of(s.mean[c]), y_of(0));
      o << "<rect x=\"" << f(x) << "\" y=\"" << f(top) << "\" width=\"26\" height=\""
        << f(bottom - top) << "\" fill=\"" << colour(si) << "\"/>\n";
      const double e = c < s.error.size() && std::isfinite(s.error[c]) ? s.error[c] : 0.0;
      if (e > 0) {
        const double cx = x + 13;
        o << "<line x1=\"" << f(cx) << "\" y1=\"" << f(y_of(s.mean[c] - e)) << "\" x2=\""
          << f(cx) << "\" y2=\"" << f(y_of(s.mean[c] + e)) << "\" stroke=\"black\"/>\n";
        for (double v : {s.mean[c] - e, s.mean[c] + e}) {
          o << "<line x1=\"" << f(cx - 5) << "\" y1=\"" << f(y_of(v)) << "\" x2=\"" << f(cx + 5)
            << "\" y2=\"" << f(y_of(v)) << "\" stroke=\"black\"/>\n";
        }
      }
    }
    o << "<text transform=\"translate(" << f(gx + group_w / 2 - 10) << ','
      << f(pad_t + plot_h + 12) << ") rotate(30)\" text-anchor=\"start\">"
      << escape(categories[c]) << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const double ly = pad_t + 16.0 * static_cast<double>(si);
    o << "<rect x=\"" << f(pad_l + plot_w + 16) << "\" y=\"" << f(ly) << "\" width=\"10\" height=\"10\" fill=\""
      << colour(si) << "\"/>\n";
    text(o, pad_l + plot_w + 32, ly + 9, series[si].name, "start");
  }
  o << "</svg>\n";
  return o.str();
}

std::string slope_distribution_svg(const std::string& title, const std::vector<SlopeGroup>& groups) {
  const double pad_l = 70, pad_t = 40, plot_h = 300, strip = 90, pad_b = 40;
  const double plot_w = strip * static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  std::ostringstream o;
  header(o, static_cast<int>(pad_l + plot_w + 20), static_cast<int>(pad_t + plot_h + pad_b));
  text(o, pad_l + plot_w / 2, 20, title, "middle", 13);

  double lo = 0.0, hi = 0.0;
  for (const auto& g : groups) {
    for (double s : g.slopes) {
      if (!std::isfinite(s)) continue;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  }
  const double span = std::max(hi - lo, 1e-9);
  lo -= 0.05 * span;
  hi += 0.05 * span;
  const auto y_of = [&](double v) { return pad_t + plot_h * (hi - v) / (hi - lo); };

  o << "<line x1=\"" << f(pad_l) << "\" y1=\"" << f(y_of(0)) << "\" x2=\"" << f(pad_l + plot_w)
    << "\" y2=\"" << f(y_of(0)) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  o << "<line x1=\"" << f(pad_l) << "\" y1=\"" << f(pad_t) << "\" x2=\"" << f(pad_l)
    << "\" y2=\"" << f(pad_t + plot_h) << "\" stroke=\"#444\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    text(o, pad_l - 4, y_of(v) + 4, format_number(std::round(v * 1e5) / 1e5), "end");
  }

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double cx = pad_l + strip * (static_cast<double>(gi) + 0.5);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < g.slopes.size(); ++i) {
      if (!std::isfinite(g.slopes[i])) continue;
      // Deterministic horizontal jitter.
      const double jitter = (static_cast<double>((i * 37) % 21) - 10.0) * 2.5;
      o << "<circle cx=\"" << f(cx + jitter) << "\" cy=\"" << f(y_of(g.slopes[i]))
        << "\" r=\"3\" fill=\"" << colour(gi) << "\" fill-opacity=\"0.6\"/>\n";
      sum += g.slopes[i];
      ++n;
    }
    if (n > 0) {
      const double m = sum / static_cast<double>(n);
      o << "<line x1=\"" << f(cx - 30) << "\" y1=\"" << f(y_of(m)) << "\" x2=\"" << f(cx + 30)
        << "\" y2=\"" << f(y_of(m)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    }
    text(o, cx, pad_t + plot_h + 18, g.name);
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace cmim
