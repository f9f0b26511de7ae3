#pragma once

#include "pillardet/numerics.hpp"
#include "pillardet/queries.hpp"

namespace pillardet {

// How the per-head receptive-field scale tau is produced.
enum class TauMode { kAdaptive, kSharedLearnable };

// Penalty term applied to the attention logits: tau * f(distance).
enum class DistanceFn { kLinear, kSquared, kSqrt };

struct SasaParams {
  std::size_t heads = 4;
  std::size_t head_dim = 8;
  TauMode tau_mode = TauMode::kAdaptive;
  DistanceFn distance_fn = DistanceFn::kLinear;

  DenseArray wq, bq;  // D x (H*d), H*d
  DenseArray wk, bk;
  DenseArray wv, bv;
  DenseArray wo, bo;        // (H*d) x D, D
  DenseArray wtau, btau;    // D x H, H
  DenseArray shared_taus;   // H, used in shared-learnable mode
  DenseArray ln_gain, ln_shift;  // D

  void validate(std::size_t feat_dim) const;
};

// D[i,j] = sqrt((x_i - x_j)^2 + (y_i - y_j)^2) over query centers.
DenseArray pairwise_bev_distance(const QuerySet& qs);

// Per-head receptive scales for one query. Adaptive mode applies the shared
// linear map to the feature; shared-learnable mode returns the scalars.
std::vector<double> head_taus(const QueryFeature& feat, const SasaParams& p);

// Per-head attention weights, each N x N with rows indexed by the attending
// query. Row i uses query i's taus.
std::vector<DenseArray> sasa_attention_weights(const QuerySet& qs, const SasaParams& p);

// Softmax(Q K^T / sqrt(d) - tau * f(D)) V per head, concatenated, output
// projected, residual-added and layer-normed. With tau = 0 this is vanilla
// multi-head self attention.
std::vector<QueryFeature> sasa_layer(const QuerySet& qs, const SasaParams& p);

}  // namespace pillardet
