#pragma once

#include <string>

#include "pillardet/decoder.hpp"
#include "pillardet/scene.hpp"

namespace pillardet {

struct FitConfig {
  std::size_t steps = 500;
  double step_size = 1e-5;
  double perturb = 5e-3;
  uint64_t seed = 0;
};

// One JSON document with sections {scene, model, sampling, streams, fit}.
// Every section is optional; unknown keys anywhere are rejected. The model's
// channel count, class count, ROI and level count are tied to the scene
// section.
struct FileConfig {
  SceneConfig scene;
  ModelConfig model;
  FitConfig fit;
};

FileConfig parse_config(const nlohmann::json& j);
FileConfig load_config(const std::string& path);

}  // namespace pillardet
