#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pillardet/numerics.hpp"

namespace pillardet {

// A detection hypothesis: pose, size, yaw and BEV velocity, all in the
// current frame's ego coordinates.
struct QueryBox {
  double x = 0.0, y = 0.0, z = 0.0;  // meters
  double w = 1.0, l = 1.0, h = 1.0;  // meters, > 0
  double yaw = 0.0;                  // radians, wrapped to [-pi, pi)
  double vx = 0.0, vy = 0.0;         // m/s in the BEV plane
};

using QueryFeature = std::vector<double>;

struct QuerySet {
  std::vector<QueryBox> boxes;
  std::vector<QueryFeature> features;

  std::size_t size() const { return boxes.size(); }
};

// Pillar initialization: z = 0, h = 4 m, zero velocity; x, y, w, l, theta
// drawn from fixed gaussians; features copied from the learnable embedding
// (one row per query). Deterministic per seed.
QuerySet init_queries(std::size_t n, uint64_t seed, double roi_half_extent,
                      const DenseArray& query_embed);

std::array<double, 9> box_to_vector(const QueryBox& b);
QueryBox vector_to_box(const std::array<double, 9>& v);

}  // namespace pillardet
