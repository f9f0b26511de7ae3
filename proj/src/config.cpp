#include "pillardet/config.hpp"

#include <set>

#include "pillardet/artifacts.hpp"

namespace pillardet {

namespace {

void reject_unknown_keys(const nlohmann::json& section, const std::set<std::string>& known,
                         const std::string& where) {
  if (!section.is_object()) throw ConfigError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    (void)value;
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in section '" + where + "'");
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_scene_section(const nlohmann::json& j, SceneConfig& scene) {
  reject_unknown_keys(j, {"num_objects", "num_classes", "roi_half_extent", "speed_min",
                          "speed_max", "size_min", "size_max", "height_min", "height_max",
                          "frames", "frame_dt", "channels", "noise_std", "ego_speed",
                          "ego_yaw_rate", "num_cameras", "camera_height", "camera_radius",
                          "image_width", "image_height", "hfov_deg", "strides"},
                      "scene");
  read(j, "num_objects", scene.num_objects);
  read(j, "num_classes", scene.num_classes);
  read(j, "roi_half_extent", scene.roi_half_extent);
  read(j, "speed_min", scene.speed_min);
  read(j, "speed_max", scene.speed_max);
  read(j, "size_min", scene.size_min);
  read(j, "size_max", scene.size_max);
  read(j, "height_min", scene.height_min);
  read(j, "height_max", scene.height_max);
  read(j, "frames", scene.frames);
  read(j, "frame_dt", scene.frame_dt);
  read(j, "channels", scene.channels);
  read(j, "noise_std", scene.noise_std);
  read(j, "ego_speed", scene.ego_speed);
  read(j, "ego_yaw_rate", scene.ego_yaw_rate);
  read(j, "num_cameras", scene.num_cameras);
  read(j, "camera_height", scene.camera_height);
  read(j, "camera_radius", scene.camera_radius);
  read(j, "image_width", scene.image_width);
  read(j, "image_height", scene.image_height);
  read(j, "hfov_deg", scene.hfov_deg);
  read(j, "strides", scene.strides);
}

void parse_model_section(const nlohmann::json& j, ModelConfig& model) {
  reject_unknown_keys(j, {"queries", "feat_dim", "heads", "head_dim", "head_hidden", "layers",
                          "tau_mode", "distance_fn", "mixing_order"},
                      "model");
  read(j, "queries", model.queries);
  read(j, "feat_dim", model.feat_dim);
  read(j, "heads", model.heads);
  read(j, "head_dim", model.head_dim);
  read(j, "head_hidden", model.head_hidden);
  read(j, "layers", model.layers);
  if (j.contains("tau_mode"))
    model.tau_mode = tau_mode_from_name(j.at("tau_mode").get<std::string>());
  if (j.contains("distance_fn"))
    model.distance_fn = distance_fn_from_name(j.at("distance_fn").get<std::string>());
  if (j.contains("mixing_order"))
    model.mixing_order = mixing_order_from_name(j.at("mixing_order").get<std::string>());
}

void parse_sampling_section(const nlohmann::json& j, SamplingConfig& sampling) {
  reject_unknown_keys(j, {"frames_used", "points_per_frame", "align_ego", "align_object"},
                      "sampling");
  std::size_t frames_used = sampling.frames;
  read(j, "frames_used", frames_used);
  sampling.frames = frames_used;
  read(j, "points_per_frame", sampling.points_per_frame);
  read(j, "align_ego", sampling.align_ego);
  read(j, "align_object", sampling.align_object);
}

void parse_streams_section(const nlohmann::json& j, SamplingConfig& sampling) {
  if (!j.is_array()) throw ConfigError("config section 'streams' must be an array");
  sampling.streams.clear();
  for (const auto& s : j) {
    reject_unknown_keys(s, {"frames", "resolution_scale"}, "streams");
    StreamSpec spec;
    spec.frames = s.at("frames").get<std::vector<std::size_t>>();
    if (s.contains("resolution_scale"))
      spec.resolution_scale = s.at("resolution_scale").get<double>();
    sampling.streams.push_back(spec);
  }
}

void parse_fit_section(const nlohmann::json& j, FitConfig& fit) {
  reject_unknown_keys(j, {"steps", "step_size", "perturb", "seed"}, "fit");
  read(j, "steps", fit.steps);
  read(j, "step_size", fit.step_size);
  read(j, "perturb", fit.perturb);
  read(j, "seed", fit.seed);
}

}  // namespace

FileConfig parse_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (key != "scene" && key != "model" && key != "sampling" && key != "streams" && key != "fit")
      throw ConfigError("unknown config section '" + key + "'");
  }

  FileConfig cfg;
  try {
    if (j.contains("scene")) parse_scene_section(j.at("scene"), cfg.scene);
    if (j.contains("model")) parse_model_section(j.at("model"), cfg.model);
    cfg.model.sampling.frames = static_cast<std::size_t>(cfg.scene.frames);
    if (j.contains("sampling")) parse_sampling_section(j.at("sampling"), cfg.model.sampling);
    if (j.contains("streams")) parse_streams_section(j.at("streams"), cfg.model.sampling);
    if (j.contains("fit")) parse_fit_section(j.at("fit"), cfg.fit);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  // The model consumes the scene's feature maps, so these are tied.
  cfg.model.channels = static_cast<std::size_t>(cfg.scene.channels);
  cfg.model.num_classes = static_cast<std::size_t>(cfg.scene.num_classes);
  cfg.model.roi_half_extent = cfg.scene.roi_half_extent;
  cfg.model.sampling.levels = cfg.scene.strides.size();
  if (cfg.model.sampling.frames > static_cast<std::size_t>(cfg.scene.frames))
    throw ConfigError("sampling.frames_used exceeds scene.frames");

  cfg.scene.validate();
  cfg.model.validate();
  return cfg;
}

FileConfig load_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace pillardet
