#include "pillardet/attention.hpp"

#include <cmath>

namespace pillardet {

namespace {

DenseArray as_row(const QueryFeature& feat) {
  return DenseArray({1, feat.size()}, std::vector<double>(feat));
}

DenseArray stack_features(const QuerySet& qs) {
  const std::size_t n = qs.size();
  const std::size_t d = qs.features.empty() ? 0 : qs.features[0].size();
  DenseArray x({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    if (qs.features[i].size() != d)
      throw ConfigError("query features must share one dimension");
    std::copy(qs.features[i].begin(), qs.features[i].end(), x.values.begin() + i * d);
  }
  return x;
}

double apply_distance_fn(double d, DistanceFn fn) {
  switch (fn) {
    case DistanceFn::kLinear: return d;
    case DistanceFn::kSquared: return d * d;
    case DistanceFn::kSqrt: return std::sqrt(d);
  }
  return d;
}

struct SasaForward {
  std::vector<DenseArray> weights;      // per head, N x N
  std::vector<QueryFeature> features;   // updated set
};

SasaForward run_sasa(const QuerySet& qs, const SasaParams& p, bool want_features) {
  const std::size_t n = qs.size();
  if (n < 1) throw ConfigError("attention needs at least one query");
  const std::size_t d_feat = qs.features[0].size();
  p.validate(d_feat);
  const std::size_t heads = p.heads, hd = p.head_dim;

  const DenseArray x = stack_features(qs);
  const DenseArray q = linear(x, p.wq, p.bq);
  const DenseArray k = linear(x, p.wk, p.bk);
  const DenseArray v = linear(x, p.wv, p.bv);
  const DenseArray dist = pairwise_bev_distance(qs);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(hd));

  DenseArray taus({n, heads});
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> t = head_taus(qs.features[i], p);
    for (std::size_t h = 0; h < heads; ++h) taus(i, h) = t[h];
  }

  SasaForward out;
  out.weights.assign(heads, DenseArray({n, n}));
  DenseArray head_concat({n, heads * hd});
  for (std::size_t h = 0; h < heads; ++h) {
    DenseArray& w = out.weights[h];
    const std::size_t off = h * hd;
    for (std::size_t i = 0; i < n; ++i) {
      DenseArray logits({n});
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < hd; ++c) dot += q(i, off + c) * k(j, off + c);
        logits(j) = dot * inv_sqrt_d - taus(i, h) * apply_distance_fn(dist(i, j), p.distance_fn);
      }
      const DenseArray row = softmax(logits, 0);
      for (std::size_t j = 0; j < n; ++j) w(i, j) = row(j);
      for (std::size_t c = 0; c < hd; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row(j) * v(j, off + c);
        head_concat(i, off + c) = acc;
      }
    }
  }
  if (!want_features) return out;

  const DenseArray projected = linear(head_concat, p.wo, p.bo);
  DenseArray resid({n, d_feat});
  for (std::size_t i = 0; i < n * d_feat; ++i) resid.values[i] = x.values[i] + projected.values[i];
  const DenseArray normed = layer_norm(resid, p.ln_gain, p.ln_shift);
  out.features.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    out.features[i].assign(normed.values.begin() + i * d_feat,
                           normed.values.begin() + (i + 1) * d_feat);
  return out;
}

}  // namespace

void SasaParams::validate(std::size_t feat_dim) const {
  if (heads < 1 || head_dim < 1) throw ConfigError("attention needs heads >= 1 and head_dim >= 1");
  const std::size_t inner = heads * head_dim;
  auto check = [&](const DenseArray& a, std::size_t r, std::size_t c, const char* name) {
    if (a.rank() != 2 || a.shape[0] != r || a.shape[1] != c)
      throw ConfigError(std::string("attention parameter has wrong shape: ") + name);
  };
  check(wq, feat_dim, inner, "wq");
  check(wk, feat_dim, inner, "wk");
  check(wv, feat_dim, inner, "wv");
  check(wo, inner, feat_dim, "wo");
  check(wtau, feat_dim, heads, "wtau");
  if (bq.numel() != inner || bk.numel() != inner || bv.numel() != inner)
    throw ConfigError("attention projection biases have wrong shape");
  if (bo.numel() != feat_dim || btau.numel() != heads || shared_taus.numel() != heads)
    throw ConfigError("attention tau/output parameters have wrong shape");
  if (ln_gain.numel() != feat_dim || ln_shift.numel() != feat_dim)
    throw ConfigError("attention layer-norm parameters have wrong shape");
}

DenseArray pairwise_bev_distance(const QuerySet& qs) {
  const std::size_t n = qs.size();
  if (n < 1) throw ConfigError("pairwise_bev_distance needs at least one query");
  DenseArray d({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dx = qs.boxes[i].x - qs.boxes[j].x;
      const double dy = qs.boxes[i].y - qs.boxes[j].y;
      d(i, j) = std::sqrt(dx * dx + dy * dy);
    }
  }
  return d;
}

std::vector<double> head_taus(const QueryFeature& feat, const SasaParams& p) {
  if (p.tau_mode == TauMode::kSharedLearnable)
    return std::vector<double>(p.shared_taus.values.begin(), p.shared_taus.values.end());
  const DenseArray t = linear(as_row(feat), p.wtau, p.btau);
  return t.values;
}

std::vector<DenseArray> sasa_attention_weights(const QuerySet& qs, const SasaParams& p) {
  return run_sasa(qs, p, /*want_features=*/false).weights;
}

std::vector<QueryFeature> sasa_layer(const QuerySet& qs, const SasaParams& p) {
  return run_sasa(qs, p, /*want_features=*/true).features;
}

}  // namespace pillardet
