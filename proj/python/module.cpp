#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pillardet/artifacts.hpp"
#include "pillardet/config.hpp"
#include "pillardet/training.hpp"

namespace py = pybind11;
using namespace pillardet;

namespace {

FileConfig config_from_str(const std::string& config_json) {
  try {
    return parse_config(nlohmann::json::parse(config_json));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

Scene scene_from_str(const std::string& scene_json) {
  try {
    return scene_from_json(nlohmann::json::parse(scene_json));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene is not valid JSON: ") + e.what());
  }
}

std::string simulate(const std::string& config_json, uint64_t seed) {
  const FileConfig cfg = config_from_str(config_json);
  return scene_to_json(build_scene(cfg.scene, seed)).dump(2) + "\n";
}

std::string ground_truth(const std::string& scene_json) {
  return gt_to_jsonl(scene_from_str(scene_json));
}

py::bytes init_params(const std::string& config_json, uint64_t seed) {
  const FileConfig cfg = config_from_str(config_json);
  return py::bytes(params_to_bytes(init_model_params(cfg.model, seed)));
}

std::string infer(const std::string& scene_json, const py::bytes& params_bytes,
                  std::size_t layers, double score_threshold, uint64_t seed) {
  const Scene scene = scene_from_str(scene_json);
  const ModelParams params = params_from_bytes(static_cast<std::string>(params_bytes));
  const std::size_t run_layers = layers == 0 ? params.config.layers : layers;
  const SceneFeatures features = render_for(scene, params.config.sampling);
  const Detections dets = run_decoder(params, scene, features, run_layers, seed);
  return detections_to_jsonl(dets, score_threshold);
}

py::tuple fit(const std::string& scene_json, const std::string& config_json, std::size_t steps,
              double step_size, double perturb, uint64_t seed) {
  const Scene scene = scene_from_str(scene_json);
  const FileConfig cfg = config_from_str(config_json);
  const ModelParams init = init_model_params(cfg.model, seed);
  const FitResult result = spsa_fit(init, scene, steps, step_size, perturb, seed);
  return py::make_tuple(py::bytes(params_to_bytes(result.params)), result.trace);
}

std::string evaluate_detections(const std::string& detections_jsonl, const std::string& gt_jsonl,
                                int frame) {
  const std::vector<PredBox> preds = preds_from_jsonl(detections_jsonl);
  const GroundTruthFrame gt = gt_frame_from_jsonl(gt_jsonl, frame);
  return metrics_to_json(evaluate(preds, gt)).dump(2) + "\n";
}

std::vector<double> softmax_vec(const std::vector<double>& x) {
  const DenseArray out = softmax(DenseArray({x.size()}, std::vector<double>(x)), 0);
  return out.values;
}

}  // namespace

PYBIND11_MODULE(pillardet, m) {
  m.doc() = "Sparse pillar-query 3D detection on a synthetic multi-camera scene";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);

  m.def("simulate", &simulate, py::arg("config_json"), py::arg("seed") = 0,
        "Build a deterministic scene; returns the scene as a JSON string.");
  m.def("ground_truth", &ground_truth, py::arg("scene_json"),
        "Ground-truth JSONL (one row per object per frame) for a scene.");
  m.def("init_params", &init_params, py::arg("config_json"), py::arg("seed") = 0,
        "Initialize model parameters; returns the serialized parameter blob.");
  m.def("infer", &infer, py::arg("scene_json"), py::arg("params"), py::arg("layers") = 0,
        py::arg("score_threshold") = 0.0, py::arg("seed") = 0,
        "Run the decoder; returns detections as JSONL (layers=0 runs the model maximum).");
  m.def("fit", &fit, py::arg("scene_json"), py::arg("config_json"), py::arg("steps"),
        py::arg("step_size"), py::arg("perturb"), py::arg("seed") = 0,
        "Forward-only parameter fit; returns (params_blob, loss_trace).");
  m.def("evaluate", &evaluate_detections, py::arg("detections_jsonl"), py::arg("gt_jsonl"),
        py::arg("frame") = 0, "Detection metrics as a JSON string.");
  m.def("softmax", &softmax_vec, py::arg("x"), "Numerically stable softmax over a vector.");
}
