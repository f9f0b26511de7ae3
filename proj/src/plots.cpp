#include "pillardet/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pillardet {

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string query_color(std::size_t query) {
  const int hue = static_cast<int>((query * 47) % 360);
  return "hsl(" + std::to_string(hue) + ",70%,50%)";
}

std::string svg_open(int width, int height) {
  std::ostringstream ss;
  ss << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  return ss.str();
}

}  // namespace

std::string svg_sampling_view(int image_width, int image_height,
                              const std::vector<ProjectedSamplePoint>& points) {
  std::ostringstream ss;
  ss << svg_open(image_width, image_height);
  ss << "<rect x=\"0\" y=\"0\" width=\"" << image_width << "\" height=\"" << image_height
     << "\" fill=\"#101018\"/>\n";
  for (const ProjectedSamplePoint& p : points) {
    const double radius = std::clamp(20.0 / std::max(p.depth, 0.1), 0.5, 8.0);
    ss << "<circle cx=\"" << fmt(p.u) << "\" cy=\"" << fmt(p.v) << "\" r=\"" << fmt(radius)
       << "\" fill=\"" << query_color(p.query) << "\" fill-opacity=\"0.8\"/>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

std::string svg_class_tau_bars(const std::map<std::size_t, double>& class_tau) {
  const int bar_width = 48, gap = 16, height = 240, margin = 40;
  const int width = margin * 2 + std::max<int>(1, static_cast<int>(class_tau.size())) *
                                     (bar_width + gap);
  double max_tau = 1e-9;
  for (const auto& [cls, tau] : class_tau) max_tau = std::max(max_tau, std::abs(tau));

  std::ostringstream ss;
  ss << svg_open(width, height + 2 * margin);
  ss << "<line x1=\"" << margin << "\" y1=\"" << margin + height << "\" x2=\"" << width - margin
     << "\" y2=\"" << margin + height << "\" stroke=\"#333\"/>\n";
  int x = margin + gap / 2;
  for (const auto& [cls, tau] : class_tau) {
    const double h = height * std::min(1.0, std::abs(tau) / max_tau);
    ss << "<rect class=\"bar\" data-class=\"" << cls << "\" x=\"" << x << "\" y=\""
       << fmt(margin + height - h) << "\" width=\"" << bar_width << "\" height=\"" << fmt(h)
       << "\" fill=\"" << query_color(cls) << "\"/>\n";
    ss << "<text x=\"" << x + bar_width / 2 << "\" y=\"" << margin + height + 16
       << "\" text-anchor=\"middle\" font-size=\"12\">c" << cls << "</text>\n";
    ss << "<text x=\"" << x + bar_width / 2 << "\" y=\"" << fmt(margin + height - h - 4)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(tau) << "</text>\n";
    x += bar_width + gap;
  }
  ss << "</svg>\n";
  return ss.str();
}

std::string svg_receptive_curves(std::vector<double> head_taus, double d_max) {
  std::sort(head_taus.begin(), head_taus.end());
  const int width = 420, height = 260, margin = 30;
  const int plot_w = width - 2 * margin, plot_h = height - 2 * margin;
  const int samples = 100;

  std::ostringstream ss;
  ss << svg_open(width, height);
  ss << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (std::size_t h = 0; h < head_taus.size(); ++h) {
    ss << "<polyline class=\"head\" data-tau=\"" << fmt(head_taus[h])
       << "\" fill=\"none\" stroke=\"" << query_color(h) << "\" stroke-width=\"1.5\" points=\"";
    for (int s = 0; s <= samples; ++s) {
      const double d = d_max * s / samples;
      const double y = std::exp(-head_taus[h] * d);
      const double px = margin + plot_w * static_cast<double>(s) / samples;
      const double py = margin + plot_h * (1.0 - std::clamp(y, 0.0, 1.0));
      ss << fmt(px) << "," << fmt(py) << " ";
    }
    ss << "\"/>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

}  // namespace pillardet
