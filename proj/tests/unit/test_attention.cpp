#include <doctest.h>

#include <cmath>

#include "../common/oracles.hpp"
#include "pillardet/attention.hpp"

using namespace pillardet;

namespace {

SasaParams make_params(std::size_t d, std::size_t heads, std::size_t head_dim, uint64_t seed) {
  SasaParams p;
  p.heads = heads;
  p.head_dim = head_dim;
  const std::size_t inner = heads * head_dim;
  p.wq = DenseArray({d, inner});
  p.bq = DenseArray({inner});
  p.wk = DenseArray({d, inner});
  p.bk = DenseArray({inner});
  p.wv = DenseArray({d, inner});
  p.bv = DenseArray({inner});
  p.wo = DenseArray({inner, d});
  p.bo = DenseArray({d});
  p.wtau = DenseArray({d, heads});
  p.btau = DenseArray({heads});
  p.shared_taus = DenseArray({heads});
  p.ln_gain = DenseArray({d}, std::vector<double>(d, 1.0));
  p.ln_shift = DenseArray({d});
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (DenseArray* w : {&p.wq, &p.wk, &p.wv, &p.wo, &p.wtau})
    for (double& v : w->values) v = s * rng.gaussian();
  return p;
}

QuerySet make_queries(std::size_t n, std::size_t d, uint64_t seed) {
  QuerySet qs;
  Rng rng(seed);
  qs.boxes.resize(n);
  qs.features.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    qs.boxes[i].x = rng.uniform(-20, 20);
    qs.boxes[i].y = rng.uniform(-20, 20);
    qs.boxes[i].w = qs.boxes[i].l = qs.boxes[i].h = 2.0;
    qs.features[i].resize(d);
    for (double& v : qs.features[i]) v = rng.gaussian();
  }
  return qs;
}

}  // namespace

TEST_CASE("pairwise distance basics") {
  QuerySet qs = make_queries(2, 4, 1);
  qs.boxes[0].x = qs.boxes[1].x = 1.0;
  qs.boxes[0].y = qs.boxes[1].y = -2.0;
  CHECK(pairwise_bev_distance(qs)(0, 1) == 0.0);

  qs.boxes[0].x = 0.0;
  qs.boxes[0].y = 0.0;
  qs.boxes[1].x = 3.0;
  qs.boxes[1].y = 4.0;
  CHECK(pairwise_bev_distance(qs)(0, 1) == doctest::Approx(5.0));
}

TEST_CASE("pairwise distance is a metric on random queries") {
  const QuerySet qs = make_queries(8, 4, 2);
  const DenseArray d = pairwise_bev_distance(qs);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(d(i, i) == 0.0);
    for (std::size_t j = 0; j < 8; ++j) {
      CHECK(std::abs(d(i, j) - d(j, i)) < 1e-9);
      const double dx = qs.boxes[i].x - qs.boxes[j].x, dy = qs.boxes[i].y - qs.boxes[j].y;
      CHECK(d(i, j) == doctest::Approx(std::sqrt(dx * dx + dy * dy)));
      for (std::size_t k = 0; k < 8; ++k) CHECK(d(i, j) <= d(i, k) + d(k, j) + 1e-9);
    }
  }
}

TEST_CASE("head_taus") {
  SasaParams p = make_params(2, 3, 2, 5);
  SUBCASE("zero weights give zero taus") {
    for (double& v : p.wtau.values) v = 0.0;
    for (double& v : p.btau.values) v = 0.0;
    for (double t : head_taus({0.7, -0.3}, p)) CHECK(t == 0.0);
  }
  SUBCASE("equal features give equal taus") {
    const auto a = head_taus({0.5, 1.5}, p);
    const auto b = head_taus({0.5, 1.5}, p);
    CHECK(a == b);
  }
  SUBCASE("hand-set weights") {
    p.wtau = DenseArray({2, 3}, {1.0, 0.0, 2.0, 0.0, 1.0, -1.0});
    p.btau = DenseArray({3}, {0.1, 0.2, 0.3});
    const auto t = head_taus({2.0, 3.0}, p);
    CHECK(t[0] == doctest::Approx(2.0 * 1.0 + 3.0 * 0.0 + 0.1));
    CHECK(t[1] == doctest::Approx(2.0 * 0.0 + 3.0 * 1.0 + 0.2));
    CHECK(t[2] == doctest::Approx(2.0 * 2.0 + 3.0 * (-1.0) + 0.3));
  }
  SUBCASE("shared-learnable mode returns the scalars") {
    p.tau_mode = TauMode::kSharedLearnable;
    p.shared_taus = DenseArray({3}, {0.5, 1.0, 1.5});
    CHECK(head_taus({9.0, 9.0}, p) == std::vector<double>{0.5, 1.0, 1.5});
  }
}

TEST_CASE("tau = 0 degrades to vanilla self attention") {
  SasaParams p = make_params(16, 4, 4, 11);
  for (double& v : p.wtau.values) v = 0.0;
  const QuerySet qs = make_queries(12, 16, 12);
  const auto got = sasa_layer(qs, p);
  const auto ref = oracles::vanilla_mhsa(qs.features, p);
  for (std::size_t i = 0; i < qs.size(); ++i)
    for (std::size_t d = 0; d < 16; ++d) CHECK(std::abs(got[i][d] - ref[i][d]) < 1e-6);
}

TEST_CASE("single query attends to itself with weight 1") {
  const SasaParams p = make_params(8, 2, 4, 21);
  const QuerySet qs = make_queries(1, 8, 22);
  const auto weights = sasa_attention_weights(qs, p);
  for (const DenseArray& w : weights) CHECK(w(0, 0) == 1.0);

  // output = LN(feat + out_proj(value(feat)))
  const auto out = sasa_layer(qs, p);
  std::vector<double> value(8, 0.0);
  for (std::size_t j = 0; j < 8; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < 8; ++k) acc += qs.features[0][k] * p.wv.values[k * 8 + j];
    value[j] = acc + p.bv.values[j];
  }
  std::vector<double> resid(8, 0.0);
  for (std::size_t j = 0; j < 8; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < 8; ++k) acc += value[k] * p.wo.values[k * 8 + j];
    resid[j] = qs.features[0][j] + acc + p.bo.values[j];
  }
  const auto ref = oracles::scalar_layer_norm(resid, 1, 8, p.ln_gain.values, p.ln_shift.values,
                                              1e-5);
  for (std::size_t j = 0; j < 8; ++j) CHECK(out[0][j] == doctest::Approx(ref[j]).epsilon(1e-9));
}

TEST_CASE("raising tau shrinks the weight ratio for distant pairs") {
  SasaParams p = make_params(8, 2, 4, 31);
  p.tau_mode = TauMode::kSharedLearnable;
  const QuerySet qs = make_queries(6, 8, 32);
  const DenseArray dist = pairwise_bev_distance(qs);

  auto ratio = [&](double tau, std::size_t i, std::size_t j) {
    for (double& v : p.shared_taus.values) v = tau;
    const auto w = sasa_attention_weights(qs, p);
    return w[0](i, j) / w[0](i, i);
  };
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (i == j || dist(i, j) <= 0.0) continue;
      const double r_lo = ratio(0.5, i, j);
      const double r_hi = ratio(1.0, i, j);
      CHECK(r_hi < r_lo);
    }
  }
}

TEST_CASE("distance function variants change the penalty as configured") {
  SasaParams p = make_params(4, 1, 4, 41);
  p.tau_mode = TauMode::kSharedLearnable;
  p.shared_taus = DenseArray({1}, {1.0});
  QuerySet qs = make_queries(2, 4, 42);
  qs.boxes[0].x = 0.0;
  qs.boxes[0].y = 0.0;
  qs.boxes[1].x = 4.0;
  qs.boxes[1].y = 0.0;
  // the log weight ratio shifts by exactly the penalty difference
  auto log_ratio = [&](DistanceFn fn) {
    p.distance_fn = fn;
    const auto w = sasa_attention_weights(qs, p);
    return std::log(w[0](0, 1) / w[0](0, 0));
  };
  const double lin = log_ratio(DistanceFn::kLinear);
  const double sq = log_ratio(DistanceFn::kSquared);
  const double rt = log_ratio(DistanceFn::kSqrt);
  CHECK(sq - lin == doctest::Approx(-(16.0 - 4.0)).epsilon(1e-9));
  CHECK(rt - lin == doctest::Approx(-(2.0 - 4.0)).epsilon(1e-9));
}

TEST_CASE("sasa layer is permutation equivariant") {
  const SasaParams p = make_params(8, 2, 4, 51);
  const QuerySet qs = make_queries(5, 8, 52);
  const auto out = sasa_layer(qs, p);

  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  QuerySet shuffled;
  shuffled.boxes.resize(5);
  shuffled.features.resize(5);
  for (std::size_t i = 0; i < 5; ++i) {
    shuffled.boxes[i] = qs.boxes[perm[i]];
    shuffled.features[i] = qs.features[perm[i]];
  }
  const auto out_shuffled = sasa_layer(shuffled, p);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t d = 0; d < 8; ++d)
      CHECK(out_shuffled[i][d] == doctest::Approx(out[perm[i]][d]).epsilon(1e-12));
}
