#include "pillardet/queries.hpp"

#include <algorithm>
#include <cmath>

namespace pillardet {

QuerySet init_queries(std::size_t n, uint64_t seed, double roi_half_extent,
                      const DenseArray& query_embed) {
  if (n < 1) throw ConfigError("init_queries: need at least one query");
  if (query_embed.rank() != 2 || query_embed.shape[0] != n)
    throw ConfigError("init_queries: query embedding must have one row per query");
  const std::size_t d = query_embed.shape[1];

  Rng rng(hash_combine(seed, 0x71E51A11ull));
  QuerySet qs;
  qs.boxes.resize(n);
  qs.features.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    QueryBox& b = qs.boxes[i];
    const double pos_std = roi_half_extent / 3.0;
    b.x = std::clamp(rng.gaussian() * pos_std, -roi_half_extent, roi_half_extent);
    b.y = std::clamp(rng.gaussian() * pos_std, -roi_half_extent, roi_half_extent);
    b.z = 0.0;
    b.w = std::max(0.5, std::abs(2.0 + 0.5 * rng.gaussian()));
    b.l = std::max(0.5, std::abs(2.0 + 0.5 * rng.gaussian()));
    b.h = 4.0;
    b.yaw = wrap_angle(rng.gaussian() * (M_PI / 2.0));
    b.vx = 0.0;
    b.vy = 0.0;
    qs.features[i].assign(query_embed.values.begin() + i * d,
                          query_embed.values.begin() + (i + 1) * d);
  }
  return qs;
}

std::array<double, 9> box_to_vector(const QueryBox& b) {
  return {b.x, b.y, b.z, b.w, b.l, b.h, wrap_angle(b.yaw), b.vx, b.vy};
}

QueryBox vector_to_box(const std::array<double, 9>& v) {
  QueryBox b;
  b.x = v[0];
  b.y = v[1];
  b.z = v[2];
  b.w = v[3];
  b.l = v[4];
  b.h = v[5];
  b.yaw = wrap_angle(v[6]);
  b.vx = v[7];
  b.vy = v[8];
  if (!(b.w > 0.0 && b.l > 0.0 && b.h > 0.0))
    throw ContractViolation("vector_to_box: box sizes must be positive");
  for (double c : v)
    if (!std::isfinite(c)) throw ContractViolation("vector_to_box: non-finite component");
  return b;
}

}  // namespace pillardet
