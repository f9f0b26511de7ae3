#pragma once

#include <array>

#include "pillardet/numerics.hpp"
#include "pillardet/queries.hpp"

namespace pillardet {

enum class MixingOrder {
  kChannelThenPoint,  // default
  kPointThenChannel,
  kChannelOnly,
  kPointOnly,
  kStatic,  // channel then point with fixed learnable weights
  kNone,    // mean over points, broadcast back to every row
};

struct MixingParams {
  MixingOrder order = MixingOrder::kChannelThenPoint;

  DenseArray cw_w, cw_b;  // D x (C*C), C*C  — channel-weight generator
  DenseArray pw_w, pw_b;  // D x (P*P), P*P  — point-weight generator
  DenseArray static_wc;   // C x C, used when order == kStatic
  DenseArray static_wp;   // P x P
  DenseArray ln_channel_gain, ln_channel_shift;  // C
  DenseArray ln_point_gain, ln_point_shift;      // P
  DenseArray agg_w, agg_b;                       // (P*C) x D, D
  DenseArray ln_out_gain, ln_out_shift;          // D
  DenseArray reg_h_w, reg_h_b;  // D x Hh, Hh
  DenseArray reg_o_w, reg_o_b;  // Hh x 9, 9
  DenseArray cls_h_w, cls_h_b;  // D x Hh, Hh
  DenseArray cls_o_w, cls_o_b;  // Hh x num_classes, num_classes

  void validate(std::size_t feat_dim, std::size_t channels, std::size_t points) const;
};

// f [P x C] -> ReLU(LN(f * W_c)) [P x C], W_c generated from the feature.
DenseArray channel_mix(const DenseArray& f, const QueryFeature& feat, const MixingParams& p);

// f [P x C] -> ReLU(LN(f^T * W_p)) [C x P].
DenseArray point_mix(const DenseArray& f, const QueryFeature& feat, const MixingParams& p);

// Applies the configured mixing order; the result is flattened row-major by
// aggregate(), so every order feeds the same P*C aggregation input.
DenseArray mix(const DenseArray& f, const QueryFeature& feat, const MixingParams& p);

// Flatten, linear, residual add to the incoming feature, layer norm.
QueryFeature aggregate(const DenseArray& mixed, const QueryFeature& feat, const MixingParams& p);

struct HeadOutput {
  std::array<double, 9> deltas{};  // dx dy dz dlogw dlogl dlogh dyaw vx vy
  std::vector<double> logits;      // per-class
};

HeadOutput predict_heads(const QueryFeature& feat, const MixingParams& p);

// Centers add, sizes scale by exp, yaw adds and wraps, velocity is replaced.
QueryBox apply_box_update(const QueryBox& box, const std::array<double, 9>& deltas);

}  // namespace pillardet
