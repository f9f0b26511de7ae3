#include <doctest.h>

#include <cmath>

#include "../common/oracles.hpp"
#include "pillardet/training.hpp"

using namespace pillardet;

TEST_CASE("hungarian basics") {
  const std::vector<int> diag = hungarian(DenseArray({2, 2}, {1, 2, 2, 1}));
  CHECK(diag == std::vector<int>{0, 1});
  CHECK(hungarian(DenseArray({1, 1}, {5.0})) == std::vector<int>{0});
  CHECK_THROWS_AS(hungarian(DenseArray({2, 2}, {1, 2, 3, std::nan("")})), ConfigError);
}

TEST_CASE("hungarian matches the exhaustive oracle") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    DenseArray cost({6, 6});
    for (double& v : cost.values) v = rng.uniform(0.0, 10.0);
    const std::vector<int> assign = hungarian(cost);
    double got = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      REQUIRE(assign[i] >= 0);
      got += cost(i, static_cast<std::size_t>(assign[i]));
    }
    std::vector<int> oracle_assign;
    const double best = oracles::brute_force_assignment(cost, &oracle_assign);
    double oracle_cost = 0.0;
    for (std::size_t i = 0; i < 6; ++i) oracle_cost += cost(i, oracle_assign[i]);
    CHECK(best == oracle_cost);
    CHECK(got == best);
  }
}

TEST_CASE("hungarian handles rectangular matrices") {
  Rng rng(62);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng.next() % 4, m = 2 + rng.next() % 4;
    DenseArray cost({n, m});
    for (double& v : cost.values) v = rng.uniform(0.0, 10.0);
    const std::vector<int> assign = hungarian(cost);
    std::vector<bool> used(m, false);
    std::size_t assigned = 0;
    double got = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] < 0) continue;
      CHECK_FALSE(used[assign[i]]);
      used[assign[i]] = true;
      ++assigned;
      got += cost(i, static_cast<std::size_t>(assign[i]));
    }
    CHECK(assigned == std::min(n, m));
    CHECK(got == doctest::Approx(oracles::brute_force_assignment(cost)).epsilon(1e-12));
  }
}

TEST_CASE("hungarian is invariant to row and column shifts") {
  Rng rng(63);
  DenseArray cost({5, 5});
  for (double& v : cost.values) v = rng.uniform(0.0, 10.0);
  const std::vector<int> base = hungarian(cost);

  DenseArray shifted = cost;
  for (std::size_t j = 0; j < 5; ++j) shifted(2, j) += 7.5;  // a full row
  for (std::size_t i = 0; i < 5; ++i) shifted(i, 3) -= 2.25;  // a full column
  CHECK(hungarian(shifted) == base);
}

TEST_CASE("focal_term") {
  CHECK(focal_term(1.0 - 1e-9, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(focal_term(1e-9, 0) == doctest::Approx(0.0).epsilon(1e-9));
  // -0.25 * (0.5)^2 * ln(0.5)
  CHECK(focal_term(0.5, 1) == doctest::Approx(0.25 * 0.25 * std::log(2.0)));
  // clamping keeps the term finite at the boundary
  CHECK(std::isfinite(focal_term(0.0, 1)));
  CHECK(std::isfinite(focal_term(1.0, 0)));
  CHECK(focal_term(0.3, 1) >= 0.0);
  CHECK(focal_term(0.3, 0) >= 0.0);
}

TEST_CASE("box_l1 weights and yaw wrap") {
  std::array<double, 9> a{1, 2, 3, 4, 5, 6, 0.5, 1, 2};
  CHECK(box_l1(a, a) == 0.0);

  std::array<double, 9> b = a;
  b[0] += 1.0;
  CHECK(box_l1(b, a) == doctest::Approx(2.0));
  b = a;
  b[3] += 1.0;
  CHECK(box_l1(b, a) == doctest::Approx(1.0));
  // yaw difference of 2*pi - 0.2 wraps to -0.2
  b = a;
  b[6] = a[6] + 2.0 * M_PI - 0.2;
  CHECK(box_l1(b, a) == doctest::Approx(0.2));
}

namespace {

Detections fake_detections(const std::vector<std::array<double, 9>>& boxes,
                           const DenseArray& scores) {
  Detections dets;
  LayerOutput layer;
  for (const auto& b : boxes) layer.boxes.push_back(vector_to_box(b));
  layer.scores = scores;
  dets.layers.push_back(layer);
  return dets;
}

}  // namespace

TEST_CASE("set_loss") {
  GroundTruthFrame gt;
  gt.boxes.push_back({0, 0, {1, 1, 0, 2, 2, 2, 0, 0, 0}});
  gt.boxes.push_back({1, 1, {-3, 2, 0, 2, 4, 2, 0.5, 1, 0}});

  SUBCASE("perfect predictions score nearly zero") {
    const Detections dets = fake_detections(
        {gt.boxes[0].box, gt.boxes[1].box},
        DenseArray({2, 2}, {1.0 - 1e-9, 1e-9, 1e-9, 1.0 - 1e-9}));
    CHECK(set_loss(dets, gt).total == doctest::Approx(0.0).epsilon(1e-6));
  }

  SUBCASE("no ground truth leaves only negative focal terms") {
    GroundTruthFrame empty;
    const Detections dets =
        fake_detections({gt.boxes[0].box}, DenseArray({1, 2}, {0.25, 0.75}));
    const double expected = 2.0 * (focal_term(0.25, 0) + focal_term(0.75, 0));
    CHECK(set_loss(dets, empty).total == doctest::Approx(expected));
  }

  SUBCASE("crafted two-query case matches the composed oracles") {
    // query 0 is near gt 1, query 1 is near gt 0
    const std::array<double, 9> q0{-3, 2.2, 0, 2, 4, 2, 0.5, 1, 0};
    const std::array<double, 9> q1{1.1, 1, 0, 2, 2, 2, 0.1, 0, 0};
    const DenseArray scores({2, 2}, {0.2, 0.7, 0.6, 0.3});
    const Detections dets = fake_detections({q0, q1}, scores);

    // expected assignment via the brute-force oracle over the same cost
    DenseArray cost({2, 2});
    const std::array<std::array<double, 9>, 2> qs{q0, q1};
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t g = 0; g < 2; ++g)
        cost(i, g) = 2.0 * focal_term(scores(i, gt.boxes[g].class_id), 1) +
                     0.25 * box_l1(qs[i], gt.boxes[g].box);
    std::vector<int> assign;
    oracles::brute_force_assignment(cost, &assign);
    REQUIRE(assign == std::vector<int>{1, 0});

    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      const int g = assign[i];
      expected += 0.25 * box_l1(qs[i], gt.boxes[g].box);
      for (std::size_t c = 0; c < 2; ++c)
        expected += 2.0 * focal_term(scores(i, c),
                                     static_cast<int>(c) == gt.boxes[g].class_id ? 1 : 0);
    }
    CHECK(set_loss(dets, gt).total == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("permutation invariance in predictions and ground truths") {
    Rng rng(71);
    std::vector<std::array<double, 9>> boxes;
    DenseArray scores({4, 2});
    for (int i = 0; i < 4; ++i) {
      boxes.push_back({rng.uniform(-5, 5), rng.uniform(-5, 5), 0, 2, 2, 2, 0.3, 0, 0});
      scores(i, 0) = rng.uniform(0.05, 0.95);
      scores(i, 1) = rng.uniform(0.05, 0.95);
    }
    const double base = set_loss(fake_detections(boxes, scores), gt).total;

    std::vector<std::array<double, 9>> boxes_perm{boxes[2], boxes[0], boxes[3], boxes[1]};
    DenseArray scores_perm({4, 2});
    const std::vector<int> perm{2, 0, 3, 1};
    for (int i = 0; i < 4; ++i)
      for (int c = 0; c < 2; ++c) scores_perm(i, c) = scores(perm[i], c);
    CHECK(set_loss(fake_detections(boxes_perm, scores_perm), gt).total ==
          doctest::Approx(base).epsilon(1e-12));

    GroundTruthFrame gt_perm;
    gt_perm.boxes = {gt.boxes[1], gt.boxes[0]};
    CHECK(set_loss(fake_detections(boxes, scores), gt_perm).total ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("spsa_fit basics") {
  SceneConfig scfg;
  scfg.num_objects = 2;
  scfg.num_classes = 2;
  scfg.frames = 2;
  scfg.channels = 8;
  scfg.noise_std = 0.05;
  scfg.image_width = 128;
  scfg.image_height = 64;
  scfg.strides = {8};
  scfg.roi_half_extent = 15.0;
  const Scene scene = build_scene(scfg, 5);

  ModelConfig mcfg;
  mcfg.queries = 4;
  mcfg.feat_dim = 8;
  mcfg.heads = 2;
  mcfg.head_dim = 4;
  mcfg.head_hidden = 8;
  mcfg.num_classes = 2;
  mcfg.channels = 8;
  mcfg.layers = 1;
  mcfg.roi_half_extent = 15.0;
  mcfg.sampling.frames = 2;
  mcfg.sampling.points_per_frame = 2;
  mcfg.sampling.levels = 1;
  const ModelParams params = init_model_params(mcfg, 6);

  SUBCASE("zero steps change nothing") {
    const FitResult r = spsa_fit(params, scene, 0, 1e-4, 1e-3, 9);
    CHECK(r.trace.empty());
    CHECK(flatten_params(r.params) == flatten_params(params));
  }
  SUBCASE("trace length equals steps and runs are deterministic") {
    const FitResult a = spsa_fit(params, scene, 3, 1e-4, 1e-3, 9);
    const FitResult b = spsa_fit(params, scene, 3, 1e-4, 1e-3, 9);
    CHECK(a.trace.size() == 3);
    CHECK(a.trace == b.trace);
    CHECK(flatten_params(a.params) == flatten_params(b.params));
  }
  SUBCASE("invalid perturbation is rejected") {
    CHECK_THROWS_AS(spsa_fit(params, scene, 1, 1e-4, 0.0, 9), ConfigError);
  }
}
