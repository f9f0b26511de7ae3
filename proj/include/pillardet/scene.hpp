#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "pillardet/geometry.hpp"
#include "pillardet/numerics.hpp"
#include "pillardet/queries.hpp"

namespace pillardet {

struct SceneConfig {
  int num_objects = 10;
  int num_classes = 4;
  double roi_half_extent = 25.0;  // meters
  double speed_min = 0.0, speed_max = 8.0;
  double size_min = 1.2, size_max = 4.0;      // w, l
  double height_min = 1.0, height_max = 3.0;  // h
  int frames = 8;
  double frame_dt = 0.5;  // seconds between adjacent frames
  int channels = 32;
  double noise_std = 0.1;
  double ego_speed = 4.0;     // m/s along world +x at the current timestamp
  double ego_yaw_rate = 0.0;  // rad/s
  int num_cameras = 6;
  double camera_height = 1.6;
  double camera_radius = 0.5;  // rig offset from the ego origin
  int image_width = 640, image_height = 256;
  double hfov_deg = 70.0;
  std::vector<int> strides = {8, 16, 32, 64};

  void validate() const;
};

struct SceneObject {
  int id = 0;
  int class_id = 0;
  Eigen::Vector3d center0 = Eigen::Vector3d::Zero();  // world position at T_0
  Eigen::Vector3d size = Eigen::Vector3d::Ones();     // (w, l, h)
  double yaw0 = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // world ground plane, m/s
  std::vector<double> signature;                       // unit-norm C-vector
};

struct GroundTruthBox {
  int object_id = 0;
  int class_id = 0;
  std::array<double, 9> box{};  // x y z w l h yaw vx vy, current-frame ego coords
};

struct GroundTruthFrame {
  std::vector<GroundTruthBox> boxes;
};

// Deterministic synthetic world: constant-velocity boxes, an ego trajectory
// with optional yaw rate, and a surround camera rig. Timestamps decrease
// strictly into the past (T_0 = 0 is the current frame).
struct Scene {
  SceneConfig config;
  uint64_t seed = 0;
  std::vector<SceneObject> objects;
  std::vector<EgoPose> ego;  // world -> ego per frame
  std::vector<CameraModel> cameras;
  std::vector<double> timestamps;

  Eigen::Vector3d object_center_world(const SceneObject& obj, std::size_t frame) const;
};

Scene build_scene(const SceneConfig& cfg, uint64_t seed);

// Ground truth at frame t, expressed in the CURRENT frame's ego coordinates.
GroundTruthFrame gt_at(const Scene& scene, std::size_t frame);

struct FeaturePyramid {
  std::vector<DenseArray> levels;  // per level: C x H_j x W_j
  std::vector<int> strides;
  double resolution_scale = 1.0;
};

// Renders per-view pyramids for one frame: seeded gaussian noise plus one
// isotropic splat of each object's signature at its projected true position.
// resolution_scale must be 1, 1/2 or 1/4.
std::vector<FeaturePyramid> render_features(const Scene& scene, std::size_t frame,
                                            double resolution_scale);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace pillardet
