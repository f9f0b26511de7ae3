#include "pillardet/scene.hpp"

#include <cmath>

namespace pillardet {

namespace {

constexpr uint64_t kObjectStreamTag = 0x0B1EC75ull;
constexpr uint64_t kSignatureTag = 0x516EA7ull;
constexpr uint64_t kNoiseTag = 0x4015Eull;

EgoPose ego_pose_at(const SceneConfig& cfg, double timestamp) {
  const Eigen::Vector3d pos(cfg.ego_speed * timestamp, 0.0, 0.0);
  const double yaw = cfg.ego_yaw_rate * timestamp;
  const RigidTransform ego_to_world = RigidTransform::from_yaw(yaw, pos);
  return {invert(ego_to_world), timestamp};
}

std::vector<CameraModel> build_rig(const SceneConfig& cfg) {
  std::vector<CameraModel> cams(cfg.num_cameras);
  const double fx =
      (cfg.image_width / 2.0) / std::tan(cfg.hfov_deg * M_PI / 180.0 / 2.0);
  for (int k = 0; k < cfg.num_cameras; ++k) {
    const double a = 2.0 * M_PI * k / cfg.num_cameras;
    const double ca = std::cos(a), sa = std::sin(a);
    // Ego axes: x forward, y left, z up. Camera axes: z optical, x right,
    // y down. Columns of ego_from_cam are the camera axes in ego coordinates.
    Eigen::Matrix3d ego_from_cam;
    ego_from_cam.col(0) = Eigen::Vector3d(sa, -ca, 0.0);
    ego_from_cam.col(1) = Eigen::Vector3d(0.0, 0.0, -1.0);
    ego_from_cam.col(2) = Eigen::Vector3d(ca, sa, 0.0);
    const Eigen::Vector3d pos(cfg.camera_radius * ca, cfg.camera_radius * sa,
                              cfg.camera_height);
    CameraModel& cam = cams[k];
    cam.camera_from_ego.rotation = ego_from_cam.transpose();
    cam.camera_from_ego.translation = -(ego_from_cam.transpose() * pos);
    cam.fx = cam.fy = fx;
    cam.cx = cfg.image_width / 2.0;
    cam.cy = cfg.image_height / 2.0;
    cam.image_width = cfg.image_width;
    cam.image_height = cfg.image_height;
    cam.strides = cfg.strides;
    cam.validate();
  }
  return cams;
}

std::vector<double> make_signature(uint64_t seed, int id, int channels) {
  Rng rng(hash_combine(hash_combine(seed, kSignatureTag), static_cast<uint64_t>(id)));
  std::vector<double> sig(channels);
  double norm2 = 0.0;
  for (double& v : sig) {
    v = rng.gaussian();
    norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  if (norm > 0.0)
    for (double& v : sig) v /= norm;
  else
    sig[0] = 1.0;
  return sig;
}

double ego_yaw(const EgoPose& pose) {
  // world_to_ego stores R = ego_to_world^T, so the ego heading in world
  // coordinates is column 0 of ego_to_world = row 0 of R.
  return std::atan2(pose.world_to_ego.rotation(0, 1), pose.world_to_ego.rotation(0, 0));
}

}  // namespace

void SceneConfig::validate() const {
  if (num_objects < 0) throw ConfigError("scene.num_objects must be >= 0");
  if (num_classes < 1) throw ConfigError("scene.num_classes must be >= 1");
  if (roi_half_extent <= 0.0) throw ConfigError("scene.roi_half_extent must be > 0");
  if (speed_min < 0.0 || speed_max < speed_min)
    throw ConfigError("scene speed range is invalid");
  if (size_min <= 0.0 || size_max < size_min) throw ConfigError("scene size range is invalid");
  if (height_min <= 0.0 || height_max < height_min)
    throw ConfigError("scene height range is invalid");
  if (frames < 1) throw ConfigError("scene.frames must be >= 1");
  if (frame_dt <= 0.0) throw ConfigError("scene.frame_dt must be > 0");
  if (channels < 1) throw ConfigError("scene.channels must be >= 1");
  if (noise_std < 0.0) throw ConfigError("scene.noise_std must be >= 0");
  if (num_cameras < 1) throw ConfigError("scene.num_cameras must be >= 1");
  if (image_width < 2 || image_height < 2) throw ConfigError("scene image extents are too small");
  if (hfov_deg <= 10.0 || hfov_deg >= 170.0) throw ConfigError("scene.hfov_deg out of range");
  if (strides.empty()) throw ConfigError("scene.strides must be non-empty");
  for (std::size_t j = 0; j < strides.size(); ++j) {
    if (strides[j] < 1) throw ConfigError("scene.strides must be positive");
    if (j > 0 && strides[j] <= strides[j - 1])
      throw ConfigError("scene.strides must be strictly increasing");
  }
}

Scene build_scene(const SceneConfig& cfg, uint64_t seed) {
  cfg.validate();
  Scene scene;
  scene.config = cfg;
  scene.seed = seed;

  scene.timestamps.resize(cfg.frames);
  for (int t = 0; t < cfg.frames; ++t) scene.timestamps[t] = -cfg.frame_dt * t;

  scene.ego.reserve(cfg.frames);
  for (double ts : scene.timestamps) scene.ego.push_back(ego_pose_at(cfg, ts));

  scene.cameras = build_rig(cfg);

  Rng rng(hash_combine(seed, kObjectStreamTag));
  scene.objects.resize(cfg.num_objects);
  for (int i = 0; i < cfg.num_objects; ++i) {
    SceneObject& obj = scene.objects[i];
    obj.id = i;
    obj.class_id = rng.uniform_int(0, cfg.num_classes - 1);
    const double span = 0.9 * cfg.roi_half_extent;
    obj.center0 = Eigen::Vector3d(rng.uniform(-span, span), rng.uniform(-span, span), 0.0);
    obj.size = Eigen::Vector3d(rng.uniform(cfg.size_min, cfg.size_max),
                               rng.uniform(cfg.size_min, cfg.size_max),
                               rng.uniform(cfg.height_min, cfg.height_max));
    obj.yaw0 = rng.uniform(-M_PI, M_PI);
    const double speed = rng.uniform(cfg.speed_min, cfg.speed_max);
    const double heading = rng.uniform(-M_PI, M_PI);
    obj.velocity = speed * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    obj.signature = make_signature(seed, obj.id, cfg.channels);
  }
  return scene;
}

Eigen::Vector3d Scene::object_center_world(const SceneObject& obj, std::size_t frame) const {
  const double dt = timestamps[frame] - timestamps[0];
  return obj.center0 + dt * Eigen::Vector3d(obj.velocity.x(), obj.velocity.y(), 0.0);
}

GroundTruthFrame gt_at(const Scene& scene, std::size_t frame) {
  if (frame >= scene.timestamps.size()) throw ConfigError("gt_at: frame out of range");
  const EgoPose& e0 = scene.ego[0];
  const double yaw0 = ego_yaw(e0);
  GroundTruthFrame gt;
  gt.boxes.reserve(scene.objects.size());
  for (const SceneObject& obj : scene.objects) {
    const Eigen::Vector3d center = e0.world_to_ego.apply(scene.object_center_world(obj, frame));
    const Eigen::Vector3d vel =
        e0.world_to_ego.rotation * Eigen::Vector3d(obj.velocity.x(), obj.velocity.y(), 0.0);
    GroundTruthBox g;
    g.object_id = obj.id;
    g.class_id = obj.class_id;
    g.box = {center.x(),   center.y(),   center.z(),
             obj.size.x(), obj.size.y(), obj.size.z(),
             wrap_angle(obj.yaw0 - yaw0), vel.x(), vel.y()};
    gt.boxes.push_back(g);
  }
  return gt;
}

std::vector<FeaturePyramid> render_features(const Scene& scene, std::size_t frame,
                                            double resolution_scale) {
  if (frame >= scene.timestamps.size()) throw ConfigError("render_features: frame out of range");
  if (resolution_scale != 1.0 && resolution_scale != 0.5 && resolution_scale != 0.25)
    throw ConfigError("render_features: resolution_scale must be 1, 1/2 or 1/4");

  const SceneConfig& cfg = scene.config;
  const std::size_t views = scene.cameras.size();
  std::vector<FeaturePyramid> out(views);

  parallel_for(views, [&](std::size_t k) {
    const CameraModel& cam = scene.cameras[k];
    FeaturePyramid& pyr = out[k];
    pyr.strides = cam.strides;
    pyr.resolution_scale = resolution_scale;
    pyr.levels.reserve(cam.strides.size());
    for (std::size_t j = 0; j < cam.strides.size(); ++j) {
      const std::size_t w = static_cast<std::size_t>(cam.level_width(j, resolution_scale));
      const std::size_t h = static_cast<std::size_t>(cam.level_height(j, resolution_scale));
      DenseArray level({static_cast<std::size_t>(cfg.channels), h, w});
      if (cfg.noise_std > 0.0) {
        Rng noise(hash_combine(hash_combine(hash_combine(hash_combine(scene.seed, kNoiseTag),
                                                         static_cast<uint64_t>(frame)),
                                            static_cast<uint64_t>(k)),
                               static_cast<uint64_t>(j)));
        for (double& v : level.values) v = cfg.noise_std * noise.gaussian();
      }
      pyr.levels.push_back(std::move(level));
    }

    for (const SceneObject& obj : scene.objects) {
      const Eigen::Vector3d p_ego =
          scene.ego[frame].world_to_ego.apply(scene.object_center_world(obj, frame));
      const Projection proj = project(cam, p_ego);
      if (!proj.hit) continue;
      for (std::size_t j = 0; j < cam.strides.size(); ++j) {
        DenseArray& level = pyr.levels[j];
        const std::size_t h = level.shape[1], w = level.shape[2];
        const double u0 = proj.u * resolution_scale / cam.strides[j];
        const double v0 = proj.v * resolution_scale / cam.strides[j];
        const double sigma = std::max(
            2.0, cam.fx * resolution_scale * obj.size.x() / (proj.depth * cam.strides[j]));
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        for (std::size_t vi = 0; vi < h; ++vi) {
          for (std::size_t ui = 0; ui < w; ++ui) {
            const double du = static_cast<double>(ui) - u0;
            const double dv = static_cast<double>(vi) - v0;
            const double g = std::exp(-(du * du + dv * dv) * inv2s2);
            for (int c = 0; c < cfg.channels; ++c)
              level.values[(static_cast<std::size_t>(c) * h + vi) * w + ui] +=
                  obj.signature[c] * g;
          }
        }
      }
    }
  });
  return out;
}

namespace {

nlohmann::json transform_to_json(const RigidTransform& t) {
  nlohmann::json j;
  std::vector<double> r(9);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r[a * 3 + b] = t.rotation(a, b);
  j["rotation"] = r;
  j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
  return j;
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  RigidTransform t;
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto tr = j.at("translation").get<std::vector<double>>();
  if (r.size() != 9 || tr.size() != 3) throw ConfigError("malformed rigid transform");
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) t.rotation(a, b) = r[a * 3 + b];
  t.translation = Eigen::Vector3d(tr[0], tr[1], tr[2]);
  if (!t.is_rigid(1e-9)) throw ConfigError("transform is not rigid");
  return t;
}

nlohmann::json config_to_json(const SceneConfig& c) {
  return nlohmann::json{{"num_objects", c.num_objects},
                        {"num_classes", c.num_classes},
                        {"roi_half_extent", c.roi_half_extent},
                        {"speed_min", c.speed_min},
                        {"speed_max", c.speed_max},
                        {"size_min", c.size_min},
                        {"size_max", c.size_max},
                        {"height_min", c.height_min},
                        {"height_max", c.height_max},
                        {"frames", c.frames},
                        {"frame_dt", c.frame_dt},
                        {"channels", c.channels},
                        {"noise_std", c.noise_std},
                        {"ego_speed", c.ego_speed},
                        {"ego_yaw_rate", c.ego_yaw_rate},
                        {"num_cameras", c.num_cameras},
                        {"camera_height", c.camera_height},
                        {"camera_radius", c.camera_radius},
                        {"image_width", c.image_width},
                        {"image_height", c.image_height},
                        {"hfov_deg", c.hfov_deg},
                        {"strides", c.strides}};
}

SceneConfig config_from_json(const nlohmann::json& j) {
  SceneConfig c;
  c.num_objects = j.at("num_objects").get<int>();
  c.num_classes = j.at("num_classes").get<int>();
  c.roi_half_extent = j.at("roi_half_extent").get<double>();
  c.speed_min = j.at("speed_min").get<double>();
  c.speed_max = j.at("speed_max").get<double>();
  c.size_min = j.at("size_min").get<double>();
  c.size_max = j.at("size_max").get<double>();
  c.height_min = j.at("height_min").get<double>();
  c.height_max = j.at("height_max").get<double>();
  c.frames = j.at("frames").get<int>();
  c.frame_dt = j.at("frame_dt").get<double>();
  c.channels = j.at("channels").get<int>();
  c.noise_std = j.at("noise_std").get<double>();
  c.ego_speed = j.at("ego_speed").get<double>();
  c.ego_yaw_rate = j.at("ego_yaw_rate").get<double>();
  c.num_cameras = j.at("num_cameras").get<int>();
  c.camera_height = j.at("camera_height").get<double>();
  c.camera_radius = j.at("camera_radius").get<double>();
  c.image_width = j.at("image_width").get<int>();
  c.image_height = j.at("image_height").get<int>();
  c.hfov_deg = j.at("hfov_deg").get<double>();
  c.strides = j.at("strides").get<std::vector<int>>();
  return c;
}

}  // namespace

nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json j;
  j["format"] = "pillardet-scene";
  j["version"] = 1;
  j["seed"] = scene.seed;
  j["config"] = config_to_json(scene.config);
  j["timestamps"] = scene.timestamps;

  nlohmann::json ego = nlohmann::json::array();
  for (const EgoPose& p : scene.ego) {
    nlohmann::json e = transform_to_json(p.world_to_ego);
    e["timestamp"] = p.timestamp;
    ego.push_back(e);
  }
  j["ego"] = ego;

  nlohmann::json cams = nlohmann::json::array();
  for (const CameraModel& c : scene.cameras) {
    nlohmann::json jc;
    jc["camera_from_ego"] = transform_to_json(c.camera_from_ego);
    jc["fx"] = c.fx;
    jc["fy"] = c.fy;
    jc["cx"] = c.cx;
    jc["cy"] = c.cy;
    jc["image_width"] = c.image_width;
    jc["image_height"] = c.image_height;
    jc["strides"] = c.strides;
    cams.push_back(jc);
  }
  j["cameras"] = cams;

  nlohmann::json objs = nlohmann::json::array();
  for (const SceneObject& o : scene.objects) {
    objs.push_back(nlohmann::json{
        {"id", o.id},
        {"class_id", o.class_id},
        {"center0", {o.center0.x(), o.center0.y(), o.center0.z()}},
        {"size", {o.size.x(), o.size.y(), o.size.z()}},
        {"yaw0", o.yaw0},
        {"velocity", {o.velocity.x(), o.velocity.y()}},
        {"signature", o.signature}});
  }
  j["objects"] = objs;
  return j;
}

Scene scene_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "pillardet-scene")
      throw ConfigError("not a scene file");
    if (j.at("version").get<int>() != 1) throw ConfigError("unsupported scene file version");
    Scene scene;
    scene.seed = j.at("seed").get<uint64_t>();
    scene.config = config_from_json(j.at("config"));
    scene.config.validate();
    scene.timestamps = j.at("timestamps").get<std::vector<double>>();
    for (std::size_t t = 1; t < scene.timestamps.size(); ++t)
      if (scene.timestamps[t] >= scene.timestamps[t - 1])
        throw ConfigError("scene timestamps must be strictly decreasing");

    for (const auto& e : j.at("ego")) {
      EgoPose p;
      p.world_to_ego = transform_from_json(e);
      p.timestamp = e.at("timestamp").get<double>();
      scene.ego.push_back(p);
    }
    if (scene.ego.size() != scene.timestamps.size())
      throw ConfigError("scene ego trajectory does not cover all frames");

    for (const auto& jc : j.at("cameras")) {
      CameraModel c;
      c.camera_from_ego = transform_from_json(jc.at("camera_from_ego"));
      c.fx = jc.at("fx").get<double>();
      c.fy = jc.at("fy").get<double>();
      c.cx = jc.at("cx").get<double>();
      c.cy = jc.at("cy").get<double>();
      c.image_width = jc.at("image_width").get<int>();
      c.image_height = jc.at("image_height").get<int>();
      c.strides = jc.at("strides").get<std::vector<int>>();
      c.validate();
      scene.cameras.push_back(c);
    }

    for (const auto& jo : j.at("objects")) {
      SceneObject o;
      o.id = jo.at("id").get<int>();
      o.class_id = jo.at("class_id").get<int>();
      const auto c0 = jo.at("center0").get<std::vector<double>>();
      const auto sz = jo.at("size").get<std::vector<double>>();
      const auto vel = jo.at("velocity").get<std::vector<double>>();
      if (c0.size() != 3 || sz.size() != 3 || vel.size() != 2)
        throw ConfigError("malformed scene object");
      o.center0 = Eigen::Vector3d(c0[0], c0[1], c0[2]);
      o.size = Eigen::Vector3d(sz[0], sz[1], sz[2]);
      o.yaw0 = jo.at("yaw0").get<double>();
      o.velocity = Eigen::Vector2d(vel[0], vel[1]);
      o.signature = jo.at("signature").get<std::vector<double>>();
      if (static_cast<int>(o.signature.size()) != scene.config.channels)
        throw ConfigError("object signature length does not match channel count");
      scene.objects.push_back(o);
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed scene file: ") + e.what());
  }
}

}  // namespace pillardet
