#pragma once

#include <map>
#include <string>
#include <vector>

#include "pillardet/sampling.hpp"

namespace pillardet {

// Sampling-point overlay for one view: circles at projected pixels, one
// color per query, radius inversely proportional to depth.
std::string svg_sampling_view(int image_width, int image_height,
                              const std::vector<ProjectedSamplePoint>& points);

// Bar chart of the mean receptive scale per class.
std::string svg_class_tau_bars(const std::map<std::size_t, double>& class_tau);

// exp(-tau * d) over BEV distance, one curve per head, sorted by tau.
std::string svg_receptive_curves(std::vector<double> head_taus, double d_max);

}  // namespace pillardet
