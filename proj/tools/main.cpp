#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "pillardet/artifacts.hpp"
#include "pillardet/config.hpp"
#include "pillardet/plots.hpp"
#include "pillardet/training.hpp"

namespace {

using namespace pillardet;

Scene load_scene(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scene file " + path + " is not valid JSON: " + e.what());
  }
  return scene_from_json(j);
}

std::pair<std::size_t, std::size_t> parse_frame_range(const std::string& text,
                                                      std::size_t max_frames) {
  std::size_t lo = 0, hi = 0;
  const auto colon = text.find(':');
  try {
    if (colon == std::string::npos) {
      lo = hi = std::stoul(text);
    } else {
      lo = std::stoul(text.substr(0, colon));
      hi = std::stoul(text.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw ConfigError("invalid frame range: " + text);
  }
  if (lo > hi || hi >= max_frames) throw ConfigError("frame range out of bounds: " + text);
  return {lo, hi};
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 const std::string& gt_out, uint64_t seed) {
  const FileConfig cfg = load_config(config_path);
  const Scene scene = build_scene(cfg.scene, seed);
  write_atomic(out_path, scene_to_json(scene).dump(2) + "\n");
  const std::string gt_path = gt_out.empty() ? out_path + ".gt.jsonl" : gt_out;
  write_atomic(gt_path, gt_to_jsonl(scene));
  std::cout << "scene: " << out_path << "\nground truth: " << gt_path << "\n";
  return 0;
}

int run_infer(const std::string& scene_path, const std::string& params_path,
              const std::string& out_path, std::optional<std::size_t> layers,
              double score_threshold, uint64_t seed) {
  const Scene scene = load_scene(scene_path);
  const ModelParams params = load_params(params_path);
  const std::size_t run_layers = layers.value_or(params.config.layers);
  const SceneFeatures features = render_for(scene, params.config.sampling);
  const Detections dets = run_decoder(params, scene, features, run_layers, seed);
  write_atomic(out_path, detections_to_jsonl(dets, score_threshold));
  std::cout << "detections: " << out_path << "\n";
  return 0;
}

int run_fit(const std::string& scene_path, const std::string& config_path,
            const std::string& init_params_path, const std::string& out_path,
            const std::string& trace_path, std::optional<std::size_t> steps,
            std::optional<double> step_size, std::optional<double> perturb,
            std::optional<uint64_t> seed) {
  const Scene scene = load_scene(scene_path);
  const FileConfig cfg = load_config(config_path);
  const uint64_t fit_seed = seed.value_or(cfg.fit.seed);
  const ModelParams init = init_params_path.empty() ? init_model_params(cfg.model, fit_seed)
                                                    : load_params(init_params_path);
  const FitResult result =
      spsa_fit(init, scene, steps.value_or(cfg.fit.steps), step_size.value_or(cfg.fit.step_size),
               perturb.value_or(cfg.fit.perturb), fit_seed);
  write_atomic(out_path, params_to_bytes(result.params));
  if (!trace_path.empty()) write_atomic(trace_path, trace_to_csv(result.trace));
  if (!result.trace.empty())
    std::cout << "loss: " << result.trace.front() << " -> " << result.trace.back() << "\n";
  std::cout << "params: " << out_path << "\n";
  return 0;
}

int run_eval(const std::string& det_path, const std::string& gt_path, const std::string& out_path,
             int frame) {
  const std::vector<PredBox> preds = preds_from_jsonl(read_file(det_path));
  const GroundTruthFrame gt = gt_frame_from_jsonl(read_file(gt_path), frame);
  const MetricsReport report = evaluate(preds, gt);
  const std::string text = metrics_to_json(report).dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_atomic(out_path, text);
  return 0;
}

int run_plot_sampling(const std::string& scene_path, const std::string& params_path,
                      const std::string& out_dir, const std::string& frames, uint64_t seed) {
  const Scene scene = load_scene(scene_path);
  const ModelParams params = load_params(params_path);
  const auto [lo, hi] = parse_frame_range(
      frames.empty() ? "0:" + std::to_string(params.config.sampling.frames - 1) : frames,
      params.config.sampling.frames);

  const SceneFeatures features = render_for(scene, params.config.sampling);
  const Detections dets = run_decoder(params, scene, features, params.config.layers, seed);
  const std::vector<ProjectedSamplePoint> points =
      project_sample_points(dets.final_queries, scene.cameras, scene.ego, scene.timestamps,
                            params.sampling, params.config.sampling);

  std::filesystem::create_directories(out_dir);
  for (std::size_t f = lo; f <= hi; ++f) {
    for (std::size_t k = 0; k < scene.cameras.size(); ++k) {
      std::vector<ProjectedSamplePoint> view_points;
      for (const ProjectedSamplePoint& p : points)
        if (p.frame == f && p.view == k) view_points.push_back(p);
      char name[64];
      std::snprintf(name, sizeof(name), "sampling_f%zu_v%zu.svg", f, k);
      write_atomic(out_dir + "/" + name,
                   svg_sampling_view(scene.config.image_width, scene.config.image_height,
                                     view_points));
    }
  }
  std::cout << "sampling plots: " << out_dir << "\n";
  return 0;
}

int run_plot_tau(const std::string& scene_path, const std::string& params_path,
                 const std::string& out_dir, double score_threshold, uint64_t seed) {
  const Scene scene = load_scene(scene_path);
  const ModelParams params = load_params(params_path);
  const SceneFeatures features = render_for(scene, params.config.sampling);
  const Detections dets = run_decoder(params, scene, features, params.config.layers, seed);

  const LayerOutput& last = dets.layers.back();
  const std::size_t n = dets.final_queries.size();
  const std::size_t heads = params.sasa.heads;

  std::string csv = "query,class,score";
  for (std::size_t h = 0; h < heads; ++h) csv += ",tau" + std::to_string(h);
  csv += "\n";

  std::map<std::size_t, std::pair<double, std::size_t>> class_acc;  // sum, count
  std::vector<double> head_sum(heads, 0.0);
  std::size_t kept = 0;
  std::vector<std::vector<double>> all_taus(n);
  for (std::size_t i = 0; i < n; ++i) {
    all_taus[i] = head_taus(dets.final_queries.features[i], params.sasa);
    std::size_t best = 0;
    for (std::size_t c = 1; c < params.config.num_classes; ++c)
      if (last.scores(i, c) > last.scores(i, best)) best = c;
    const double score = last.scores(i, best);

    char cell[64];
    std::snprintf(cell, sizeof(cell), "%zu,%zu,%.17g", i, best, score);
    csv += cell;
    for (std::size_t h = 0; h < heads; ++h) {
      std::snprintf(cell, sizeof(cell), ",%.17g", all_taus[i][h]);
      csv += cell;
    }
    csv += "\n";

    if (score > score_threshold) {
      ++kept;
      double mean = 0.0;
      for (std::size_t h = 0; h < heads; ++h) {
        head_sum[h] += all_taus[i][h];
        mean += all_taus[i][h];
      }
      auto& acc = class_acc[best];
      acc.first += mean / static_cast<double>(heads);
      acc.second += 1;
    }
  }

  std::map<std::size_t, double> class_tau;
  for (const auto& [cls, acc] : class_acc)
    class_tau[cls] = acc.first / static_cast<double>(acc.second);

  std::vector<double> head_means(heads, 0.0);
  if (kept > 0) {
    for (std::size_t h = 0; h < heads; ++h)
      head_means[h] = head_sum[h] / static_cast<double>(kept);
  } else {
    // Nothing above threshold: fall back to all queries for the curves.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < heads; ++h) head_means[h] += all_taus[i][h];
    for (std::size_t h = 0; h < heads; ++h) head_means[h] /= static_cast<double>(n);
  }

  std::filesystem::create_directories(out_dir);
  write_atomic(out_dir + "/tau_dump.csv", csv);
  write_atomic(out_dir + "/tau_by_class.svg", svg_class_tau_bars(class_tau));
  write_atomic(out_dir + "/receptive_field.svg",
               svg_receptive_curves(head_means, params.config.roi_half_extent));
  std::cout << "tau plots: " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pillardet: sparse pillar-query 3D detection on a synthetic multi-camera scene"};
  app.require_subcommand(1);

  std::string config_path, scene_path, params_path, out_path, gt_path, trace_path, out_dir;
  std::string det_path, init_params_path, frames_range;
  uint64_t seed = 0;
  double score_threshold = 0.0;
  int frame = 0;
  std::optional<std::size_t> layers, steps;
  std::optional<double> step_size, perturb;
  std::optional<uint64_t> fit_seed;

  auto* simulate = app.add_subcommand("simulate", "Build a deterministic scene and ground truth");
  simulate->add_option("--config", config_path, "Config file (JSON)")->required();
  simulate->add_option("--out", out_path, "Scene output path")->required();
  simulate->add_option("--gt-out", gt_path, "Ground-truth JSONL path (default: <out>.gt.jsonl)");
  simulate->add_option("--seed", seed, "Scene seed");

  auto* infer = app.add_subcommand("infer", "Run the decoder and write detections");
  infer->add_option("--scene", scene_path, "Scene file")->required();
  infer->add_option("--params", params_path, "Parameter file")->required();
  infer->add_option("--out", out_path, "Detections JSONL path")->required();
  infer->add_option("--layers", layers, "Decoder layers to run (default: model maximum)");
  infer->add_option("--score-threshold", score_threshold, "Per-layer score filter");
  infer->add_option("--seed", seed, "Query init seed");

  auto* fit = app.add_subcommand("fit", "Forward-only parameter fit on one scene");
  fit->add_option("--scene", scene_path, "Scene file")->required();
  fit->add_option("--config", config_path, "Config file (model + fit sections)")->required();
  fit->add_option("--out", out_path, "Fitted parameter output path")->required();
  fit->add_option("--trace", trace_path, "Loss trace CSV path");
  fit->add_option("--init-params", init_params_path, "Start from these parameters");
  fit->add_option("--steps", steps, "Fit steps (overrides config)");
  fit->add_option("--step-size", step_size, "Update scale (overrides config)");
  fit->add_option("--perturb", perturb, "Probe scale (overrides config)");
  fit->add_option("--seed", fit_seed, "Fit seed (overrides config)");

  auto* eval = app.add_subcommand("eval", "Detection metrics against ground truth");
  eval->add_option("--detections", det_path, "Detections JSONL")->required();
  eval->add_option("--gt", gt_path, "Ground-truth JSONL")->required();
  eval->add_option("--out", out_path, "Metrics JSON path (default: stdout)");
  eval->add_option("--frame", frame, "Ground-truth frame to evaluate against");

  auto* plot_sampling = app.add_subcommand("plot-sampling", "SVG overlays of sampling points");
  plot_sampling->add_option("--scene", scene_path, "Scene file")->required();
  plot_sampling->add_option("--params", params_path, "Parameter file")->required();
  plot_sampling->add_option("--out-dir", out_dir, "Output directory")->required();
  plot_sampling->add_option("--frames", frames_range, "Frame range a:b (default: all)");
  plot_sampling->add_option("--seed", seed, "Query init seed");

  auto* plot_tau = app.add_subcommand("plot-tau", "SVG receptive-scale charts");
  plot_tau->add_option("--scene", scene_path, "Scene file")->required();
  plot_tau->add_option("--params", params_path, "Parameter file")->required();
  plot_tau->add_option("--out-dir", out_dir, "Output directory")->required();
  plot_tau->add_option("--score-threshold", score_threshold, "Query score filter")
      ->default_val(0.3);
  plot_tau->add_option("--seed", seed, "Query init seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) return run_simulate(config_path, out_path, gt_path, seed);
    if (infer->parsed())
      return run_infer(scene_path, params_path, out_path, layers, score_threshold, seed);
    if (fit->parsed())
      return run_fit(scene_path, config_path, init_params_path, out_path, trace_path, steps,
                     step_size, perturb, fit_seed);
    if (eval->parsed()) return run_eval(det_path, gt_path, out_path, frame);
    if (plot_sampling->parsed())
      return run_plot_sampling(scene_path, params_path, out_dir, frames_range, seed);
    if (plot_tau->parsed())
      return run_plot_tau(scene_path, params_path, out_dir, score_threshold, seed);
  } catch (const pillardet::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pillardet::ContractViolation& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
