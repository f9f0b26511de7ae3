#include "pillardet/mixing.hpp"

#include <cmath>

namespace pillardet {

namespace {

DenseArray as_row(const QueryFeature& feat) {
  return DenseArray({1, feat.size()}, std::vector<double>(feat));
}

DenseArray channel_mix_with(const DenseArray& f, const DenseArray& wc, const MixingParams& p) {
  return relu(layer_norm(matmul(f, wc), p.ln_channel_gain, p.ln_channel_shift));
}

DenseArray point_mix_with(const DenseArray& f, const DenseArray& wp, const MixingParams& p) {
  return relu(layer_norm(matmul(transpose2(f), wp), p.ln_point_gain, p.ln_point_shift));
}

}  // namespace

void MixingParams::validate(std::size_t feat_dim, std::size_t channels,
                            std::size_t points) const {
  auto check = [](const DenseArray& a, std::size_t r, std::size_t c, const char* name) {
    if (a.rank() != 2 || a.shape[0] != r || a.shape[1] != c)
      throw ConfigError(std::string("mixing parameter has wrong shape: ") + name);
  };
  check(cw_w, feat_dim, channels * channels, "cw_w");
  check(pw_w, feat_dim, points * points, "pw_w");
  check(static_wc, channels, channels, "static_wc");
  check(static_wp, points, points, "static_wp");
  check(agg_w, points * channels, feat_dim, "agg_w");
  const std::size_t hidden = reg_h_w.rank() == 2 ? reg_h_w.shape[1] : 0;
  check(reg_h_w, feat_dim, hidden, "reg_h_w");
  check(reg_o_w, hidden, 9, "reg_o_w");
  check(cls_h_w, feat_dim, hidden, "cls_h_w");
  if (cls_o_w.rank() != 2 || cls_o_w.shape[0] != hidden)
    throw ConfigError("mixing parameter has wrong shape: cls_o_w");
  if (cw_b.numel() != channels * channels || pw_b.numel() != points * points ||
      agg_b.numel() != feat_dim || reg_h_b.numel() != hidden || reg_o_b.numel() != 9 ||
      cls_h_b.numel() != hidden || cls_o_b.numel() != cls_o_w.shape[1])
    throw ConfigError("mixing bias has wrong shape");
  if (ln_channel_gain.numel() != channels || ln_channel_shift.numel() != channels ||
      ln_point_gain.numel() != points || ln_point_shift.numel() != points ||
      ln_out_gain.numel() != feat_dim || ln_out_shift.numel() != feat_dim)
    throw ConfigError("mixing layer-norm parameters have wrong shape");
}

DenseArray channel_mix(const DenseArray& f, const QueryFeature& feat, const MixingParams& p) {
  const std::size_t c = f.shape[1];
  const DenseArray wc = linear(as_row(feat), p.cw_w, p.cw_b).reshaped({c, c});
  return channel_mix_with(f, wc, p);
}

DenseArray point_mix(const DenseArray& f, const QueryFeature& feat, const MixingParams& p) {
  const std::size_t n = f.shape[0];
  const DenseArray wp = linear(as_row(feat), p.pw_w, p.pw_b).reshaped({n, n});
  return point_mix_with(f, wp, p);
}

DenseArray mix(const DenseArray& f, const QueryFeature& feat, const MixingParams& p) {
  if (f.rank() != 2) throw ConfigError("mix expects sampled features of shape P x C");
  switch (p.order) {
    case MixingOrder::kChannelThenPoint:
      return point_mix(channel_mix(f, feat, p), feat, p);
    case MixingOrder::kPointThenChannel:
      return channel_mix(transpose2(point_mix(f, feat, p)), feat, p);
    case MixingOrder::kChannelOnly:
      return channel_mix(f, feat, p);
    case MixingOrder::kPointOnly:
      return point_mix(f, feat, p);
    case MixingOrder::kStatic:
      return point_mix_with(channel_mix_with(f, p.static_wc, p), p.static_wp, p);
    case MixingOrder::kNone: {
      // Every row becomes the mean over points; aggregation then sees a
      // plain average of the sampled features.
      const std::size_t n = f.shape[0], c = f.shape[1];
      DenseArray out({n, c});
      for (std::size_t k = 0; k < c; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += f(i, k);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) out(i, k) = mean;
      }
      return out;
    }
  }
  throw ConfigError("unknown mixing order");
}

QueryFeature aggregate(const DenseArray& mixed, const QueryFeature& feat, const MixingParams& p) {
  const DenseArray flat({1, mixed.numel()}, mixed.values);
  const DenseArray projected = linear(flat, p.agg_w, p.agg_b);
  DenseArray resid({1, feat.size()});
  for (std::size_t i = 0; i < feat.size(); ++i) resid.values[i] = feat[i] + projected.values[i];
  return layer_norm(resid, p.ln_out_gain, p.ln_out_shift).values;
}

HeadOutput predict_heads(const QueryFeature& feat, const MixingParams& p) {
  const DenseArray x = as_row(feat);
  const DenseArray reg = linear(relu(linear(x, p.reg_h_w, p.reg_h_b)), p.reg_o_w, p.reg_o_b);
  const DenseArray cls = linear(relu(linear(x, p.cls_h_w, p.cls_h_b)), p.cls_o_w, p.cls_o_b);
  HeadOutput out;
  std::copy(reg.values.begin(), reg.values.end(), out.deltas.begin());
  out.logits = cls.values;
  return out;
}

QueryBox apply_box_update(const QueryBox& box, const std::array<double, 9>& deltas) {
  QueryBox b = box;
  b.x += deltas[0];
  b.y += deltas[1];
  b.z += deltas[2];
  b.w *= std::exp(deltas[3]);
  b.l *= std::exp(deltas[4]);
  b.h *= std::exp(deltas[5]);
  b.yaw = wrap_angle(b.yaw + deltas[6]);
  b.vx = deltas[7];
  b.vy = deltas[8];
  for (double v : {b.x, b.y, b.z, b.w, b.l, b.h, b.yaw, b.vx, b.vy})
    if (!std::isfinite(v)) throw ContractViolation("apply_box_update produced non-finite box");
  return b;
}

}  // namespace pillardet
