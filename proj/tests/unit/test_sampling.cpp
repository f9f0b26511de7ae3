#include <doctest.h>

#include <cmath>

#include "pillardet/sampling.hpp"

using namespace pillardet;

namespace {

SamplingParams make_params(std::size_t d, const SamplingConfig& cfg, uint64_t seed) {
  SamplingParams p;
  const std::size_t ts = cfg.frames * cfg.points_per_frame;
  p.offset_w = DenseArray({d, ts * 3});
  p.offset_b = DenseArray({ts * 3});
  p.scalew_w = DenseArray({d, ts * cfg.levels});
  p.scalew_b = DenseArray({ts * cfg.levels});
  Rng rng(seed);
  for (double& v : p.offset_w.values) v = 0.3 * rng.gaussian();
  for (double& v : p.scalew_w.values) v = rng.gaussian();
  return p;
}

CameraModel simple_camera() {
  CameraModel cam;
  cam.fx = cam.fy = 32.0;
  cam.cx = 32.0;
  cam.cy = 16.0;
  cam.image_width = 64;
  cam.image_height = 32;
  cam.strides = {8};
  return cam;
}

}  // namespace

TEST_CASE("gen_offsets") {
  SamplingConfig cfg;
  cfg.frames = 2;
  cfg.points_per_frame = 3;
  cfg.levels = 1;
  SUBCASE("zero parameters give zero offsets") {
    SamplingParams p = make_params(4, cfg, 1);
    for (double& v : p.offset_w.values) v = 0.0;
    const DenseArray off = gen_offsets({1.0, 2.0, 3.0, 4.0}, p, cfg);
    CHECK(off.shape == std::vector<std::size_t>{2, 3, 3});
    for (double v : off.values) CHECK(v == 0.0);
  }
  SUBCASE("hand-set single-dim feature") {
    SamplingParams p = make_params(1, cfg, 1);
    for (std::size_t j = 0; j < p.offset_w.shape[1]; ++j)
      p.offset_w.values[j] = static_cast<double>(j);
    p.offset_b.values[0] = 10.0;
    const DenseArray off = gen_offsets({2.0}, p, cfg);
    CHECK(off.numel() == 2 * 3 * 3);
    CHECK(off(0, 0, 0) == doctest::Approx(10.0));       // 2*0 + 10
    CHECK(off(0, 0, 1) == doctest::Approx(2.0));        // 2*1
    CHECK(off(1, 2, 2) == doctest::Approx(2.0 * 17));   // last slot
  }
}

TEST_CASE("pillar_to_ego matches the rotate-scale-translate rule") {
  QueryBox b;
  b.x = 1.0;
  b.y = 1.0;
  b.z = 0.0;
  b.w = b.l = b.h = 2.0;
  b.yaw = 0.0;
  const Eigen::Vector3d axis_aligned = pillar_to_ego(b, {0.5, 0.5, 0.5});
  CHECK(axis_aligned.isApprox(Eigen::Vector3d(2, 2, 1), 1e-12));

  b.yaw = M_PI / 2.0;
  const Eigen::Vector3d rotated = pillar_to_ego(b, {0.5, 0.5, 0.5});
  CHECK(rotated.isApprox(Eigen::Vector3d(0, 2, 1), 1e-12));

  const Eigen::Vector3d center = pillar_to_ego(b, {0, 0, 0});
  CHECK(center.isApprox(Eigen::Vector3d(1, 1, 0), 1e-12));
}

TEST_CASE("warp_object_motion") {
  const Eigen::Vector3d p(2, 3, 1);
  CHECK(warp_object_motion(p, 1.0, 2.0, 0.0).isApprox(p));
  CHECK(warp_object_motion(p, 1.0, 2.0, -0.5).isApprox(Eigen::Vector3d(1.5, 2.0, 1.0)));
  CHECK(warp_object_motion(p, 0.0, 0.0, -7.0).isApprox(p));
}

TEST_CASE("scale_weights normalize over the level axis") {
  SamplingConfig cfg;
  cfg.frames = 2;
  cfg.points_per_frame = 2;
  cfg.levels = 3;
  SamplingParams p = make_params(4, cfg, 3);
  SUBCASE("zero logits give uniform weights") {
    for (double& v : p.scalew_w.values) v = 0.0;
    const DenseArray w = scale_weights({1, 1, 1, 1}, p, cfg);
    for (double v : w.values) CHECK(v == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("per-point sums are one") {
    const DenseArray w = scale_weights({0.3, -1.2, 0.8, 2.0}, p, cfg);
    for (std::size_t t = 0; t < 2; ++t)
      for (std::size_t i = 0; i < 2; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 3; ++j) sum += w(t, i, j);
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
  }
  SUBCASE("hand-set logits") {
    cfg.levels = 2;
    cfg.frames = 1;
    cfg.points_per_frame = 1;
    SamplingParams p2 = make_params(1, cfg, 4);
    p2.scalew_w.values = {0.0, 0.0};
    p2.scalew_b.values = {0.0, std::log(2.0)};
    const DenseArray w = scale_weights({1.0}, p2, cfg);
    CHECK(w.values[0] == doctest::Approx(1.0 / 3.0));
    CHECK(w.values[1] == doctest::Approx(2.0 / 3.0));
  }
}

TEST_CASE("route_streams") {
  SamplingConfig cfg;
  cfg.frames = 4;
  cfg.points_per_frame = 5;
  cfg.levels = 1;
  SUBCASE("default single stream covers all frames at scale 1") {
    const auto plan = route_streams(cfg);
    CHECK(plan.size() == 4);
    CHECK(cfg.total_points() == 20);
    for (std::size_t f = 0; f < 4; ++f) {
      CHECK(plan[f].frame == f);
      CHECK(plan[f].resolution_scale == 1.0);
    }
  }
  SUBCASE("slow + fast stream shapes") {
    cfg.streams = {{{0, 1}, 1.0}, {{0, 1, 2, 3}, 0.25}};
    const auto plan = route_streams(cfg);
    CHECK(plan.size() == 6);
    CHECK(cfg.total_points() == (2 + 4) * 5);
    // frame 0 appears in both streams: sampled twice by definition
    std::size_t count_f0 = 0;
    for (const auto& task : plan) count_f0 += task.frame == 0 ? 1 : 0;
    CHECK(count_f0 == 2);
  }
  SUBCASE("uncovered frame is rejected") {
    cfg.streams = {{{0, 1}, 1.0}};
    CHECK_THROWS_AS(route_streams(cfg), ConfigError);
  }
  SUBCASE("bad resolution scale is rejected") {
    cfg.streams = {{{0, 1, 2, 3}, 0.4}};
    CHECK_THROWS_AS(route_streams(cfg), ConfigError);
  }
}

TEST_CASE("sample_spatiotemporal on a hand-built pyramid") {
  SamplingConfig cfg;
  cfg.frames = 1;
  cfg.points_per_frame = 1;
  cfg.levels = 1;
  cfg.align_ego = false;
  cfg.align_object = false;

  SamplingParams p = make_params(2, cfg, 5);
  for (double& v : p.offset_w.values) v = 0.0;  // sample the query center

  const CameraModel cam = simple_camera();
  // map with a recognizable channel pattern at an exact texel
  FeaturePyramid pyr;
  pyr.strides = {8};
  pyr.resolution_scale = 1.0;
  DenseArray level({3, 4, 8});
  Rng rng(6);
  for (double& v : level.values) v = rng.gaussian();
  pyr.levels.push_back(level);

  SceneFeatures features;
  features.by_frame_scale[{0, 1.0}] = {pyr};

  const std::vector<EgoPose> poses{{RigidTransform::identity(), 0.0}};
  const std::vector<double> timestamps{0.0};

  QueryBox box;
  box.w = box.l = box.h = 1.0;
  // A point at ego (0, -y, z) relative to camera 0 projects to
  // u = 32 + 32*y'/depth. Choose it to land on level texel (2, 1): pixel (16, 8).
  // pixel (16,8): x_cam = (16-32)/32*depth, y_cam = (8-16)/32*depth
  const double depth = 4.0;
  const Eigen::Vector3d p_cam(-0.5 * depth, -0.25 * depth, depth);
  // camera_from_ego is identity here, so p_ego == p_cam
  box.x = p_cam.x();
  box.y = p_cam.y();
  box.z = p_cam.z();

  SUBCASE("exact texel returns the channel vector") {
    const DenseArray f =
        sample_spatiotemporal(box, {0.0, 0.0}, features, {cam}, poses, timestamps, p, cfg);
    REQUIRE(f.shape == std::vector<std::size_t>{1, 3});
    for (std::size_t c = 0; c < 3; ++c) CHECK(f(0, c) == doctest::Approx(level(c, 1, 2)));
  }

  SUBCASE("point behind every camera yields a zero row") {
    box.z = -5.0;
    const DenseArray f =
        sample_spatiotemporal(box, {0.0, 0.0}, features, {cam}, poses, timestamps, p, cfg);
    for (double v : f.values) CHECK(v == 0.0);
  }

  SUBCASE("two co-located cameras average to the single-camera result") {
    SceneFeatures both;
    both.by_frame_scale[{0, 1.0}] = {pyr, pyr};
    const DenseArray one =
        sample_spatiotemporal(box, {0.0, 0.0}, features, {cam}, poses, timestamps, p, cfg);
    const DenseArray two =
        sample_spatiotemporal(box, {0.0, 0.0}, both, {cam, cam}, poses, timestamps, p, cfg);
    for (std::size_t i = 0; i < one.numel(); ++i)
      CHECK(two.values[i] == doctest::Approx(one.values[i]).epsilon(1e-12));
  }
}

TEST_CASE("motion alignment lands on the true object center in every past frame") {
  SceneConfig scfg;
  scfg.num_objects = 0;
  scfg.num_classes = 1;
  scfg.frames = 4;
  scfg.channels = 4;
  scfg.noise_std = 0.0;
  scfg.image_width = 128;
  scfg.image_height = 64;
  scfg.strides = {8};
  scfg.ego_speed = 3.0;
  scfg.ego_yaw_rate = 0.25;
  Scene scene = build_scene(scfg, 8);

  SceneObject obj;
  obj.id = 0;
  obj.class_id = 0;
  obj.center0 = Eigen::Vector3d(8.0, 3.0, 0.0);
  obj.velocity = Eigen::Vector2d(1.5, -2.0);
  obj.size = Eigen::Vector3d(2, 2, 2);
  obj.signature.assign(scfg.channels, 0.5);
  scene.objects.push_back(obj);

  SamplingConfig cfg;
  cfg.frames = 4;
  cfg.points_per_frame = 1;
  cfg.levels = 1;

  SamplingParams p = make_params(2, cfg, 7);
  for (double& v : p.offset_w.values) v = 0.0;  // center point only

  // query at the object's current pose with the true (ego-frame) velocity
  const GroundTruthFrame gt = gt_at(scene, 0);
  QueryBox box = vector_to_box(gt.boxes[0].box);

  const DenseArray offsets = gen_offsets({0.0, 0.0}, p, cfg);

  SUBCASE("both alignments on: exact coincidence") {
    for (std::size_t t = 0; t < 4; ++t) {
      const auto pts = warped_points(box, offsets, t, scene.ego, scene.timestamps, cfg);
      const Eigen::Vector3d truth =
          scene.ego[t].world_to_ego.apply(scene.object_center_world(obj, t));
      CHECK((pts[0] - truth).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  SUBCASE("disabling either flag breaks coincidence measurably") {
    SamplingConfig no_obj = cfg;
    no_obj.align_object = false;
    SamplingConfig no_ego = cfg;
    no_ego.align_ego = false;
    for (std::size_t t = 1; t < 4; ++t) {
      const Eigen::Vector3d truth =
          scene.ego[t].world_to_ego.apply(scene.object_center_world(obj, t));
      const auto p1 = warped_points(box, offsets, t, scene.ego, scene.timestamps, no_obj);
      const auto p2 = warped_points(box, offsets, t, scene.ego, scene.timestamps, no_ego);
      CHECK((p1[0] - truth).norm() > 0.1);
      CHECK((p2[0] - truth).norm() > 0.1);
    }
  }
  SUBCASE("both flags off reduces to the unwarped current-frame point") {
    SamplingConfig off = cfg;
    off.align_ego = false;
    off.align_object = false;
    for (std::size_t t = 0; t < 4; ++t) {
      const auto pts = warped_points(box, offsets, t, scene.ego, scene.timestamps, off);
      CHECK(pts[0].isApprox(Eigen::Vector3d(box.x, box.y, box.z), 1e-12));
    }
  }
}

TEST_CASE("dual-stream rows are a permutation of the single-stream rows") {
  SceneConfig scfg;
  scfg.num_objects = 2;
  scfg.num_classes = 1;
  scfg.frames = 4;
  scfg.channels = 4;
  scfg.noise_std = 0.1;
  scfg.image_width = 128;
  scfg.image_height = 64;
  scfg.strides = {8, 16};
  const Scene scene = build_scene(scfg, 13);

  SamplingConfig single;
  single.frames = 4;
  single.points_per_frame = 3;
  single.levels = 2;

  SamplingConfig dual = single;
  dual.streams = {{{0, 2}, 1.0}, {{1, 3}, 1.0}};

  const SamplingParams p = make_params(6, single, 17);
  QueryBox box;
  box.x = 5.0;
  box.y = 1.0;
  box.w = box.l = 2.0;
  box.h = 4.0;
  box.vx = 0.5;
  box.vy = -0.5;
  const QueryFeature feat{0.1, -0.2, 0.3, 0.4, -0.5, 0.6};

  const SceneFeatures feats_single = render_for(scene, single);
  const SceneFeatures feats_dual = render_for(scene, dual);
  const DenseArray rows_single = sample_spatiotemporal(box, feat, feats_single, scene.cameras,
                                                       scene.ego, scene.timestamps, p, single);
  const DenseArray rows_dual = sample_spatiotemporal(box, feat, feats_dual, scene.cameras,
                                                     scene.ego, scene.timestamps, p, dual);
  REQUIRE(rows_single.shape == rows_dual.shape);

  // dual order: frames 0,2,1,3 -> single rows 0,2,1,3
  const std::vector<std::size_t> frame_order{0, 2, 1, 3};
  const std::size_t s = single.points_per_frame, c = scfg.channels;
  for (std::size_t block = 0; block < 4; ++block) {
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t dual_row = block * s + i;
      const std::size_t single_row = frame_order[block] * s + i;
      for (std::size_t ch = 0; ch < c; ++ch)
        CHECK(rows_dual(dual_row, ch) == rows_single(single_row, ch));
    }
  }
}
