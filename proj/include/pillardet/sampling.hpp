#pragma once

#include <map>
#include <utility>
#include <vector>

#include "pillardet/scene.hpp"

namespace pillardet {

// Frame subset sampled at one resolution.
struct StreamSpec {
  std::vector<std::size_t> frames;  // subset of 0..T-1
  double resolution_scale = 1.0;    // 1, 1/2 or 1/4
};

struct SamplingConfig {
  std::size_t frames = 8;            // T
  std::size_t points_per_frame = 16; // S
  std::size_t levels = 4;            // feature-map levels per view
  bool align_ego = true;
  bool align_object = true;
  std::vector<StreamSpec> streams;   // empty -> single stream, all frames, scale 1

  // Rows emitted by sample_spatiotemporal: sum over streams of |frames| * S.
  std::size_t total_points() const;
  void validate() const;
};

struct SamplingParams {
  DenseArray offset_w, offset_b;  // D x (T*S*3), T*S*3
  DenseArray scalew_w, scalew_b;  // D x (T*S*levels), T*S*levels

  void validate(std::size_t feat_dim, const SamplingConfig& cfg) const;
};

struct SampleTask {
  std::size_t stream = 0;
  std::size_t frame = 0;
  double resolution_scale = 1.0;
};

// Flattens the stream plan into (stream, frame, scale) tasks, stream by
// stream, frames in the order each stream lists them. Output rows of
// sample_spatiotemporal follow this order, S points per task. A single
// stream covering all frames at scale 1 reproduces the plain model.
std::vector<SampleTask> route_streams(const SamplingConfig& cfg);

// Pyramids rendered per (frame, resolution scale), one per view.
struct SceneFeatures {
  std::map<std::pair<std::size_t, double>, std::vector<FeaturePyramid>> by_frame_scale;

  const std::vector<FeaturePyramid>& get(std::size_t frame, double scale) const;
};

// Renders every (frame, scale) pair the stream plan needs.
SceneFeatures render_for(const Scene& scene, const SamplingConfig& cfg);

// Offsets are a pure linear map of the query feature, one triple per
// (frame, point).
DenseArray gen_offsets(const QueryFeature& feat, const SamplingParams& p,
                       const SamplingConfig& cfg);  // [T, S, 3]

// Scales the offset by the box dimensions, rotates by yaw about z and
// translates by the box center.
Eigen::Vector3d pillar_to_ego(const QueryBox& box, const Eigen::Vector3d& offset);

// Constant-velocity warp in the BEV plane; z is unchanged.
Eigen::Vector3d warp_object_motion(const Eigen::Vector3d& pt, double vx, double vy, double dt);

// Per-point weights over the level axis, softmax-normalized.
DenseArray scale_weights(const QueryFeature& feat, const SamplingParams& p,
                         const SamplingConfig& cfg);  // [T, S, levels]

// Sampling points for one query at one frame, in that frame's ego
// coordinates: pillar transform, then object warp, then ego warp (each warp
// subject to its config flag).
std::vector<Eigen::Vector3d> warped_points(const QueryBox& box, const DenseArray& offsets,
                                           std::size_t frame, const std::vector<EgoPose>& poses,
                                           const std::vector<double>& timestamps,
                                           const SamplingConfig& cfg);

// One feature row per (stream, frame, point): project into every view,
// blend levels with the scale weights, average over hit views. Points that
// miss every view yield zero rows.
DenseArray sample_spatiotemporal(const QueryBox& box, const QueryFeature& feat,
                                 const SceneFeatures& features,
                                 const std::vector<CameraModel>& cams,
                                 const std::vector<EgoPose>& poses,
                                 const std::vector<double>& timestamps, const SamplingParams& p,
                                 const SamplingConfig& cfg);  // [P_total, C]

// Projected sampling points for visualization, full-resolution pixels.
struct ProjectedSamplePoint {
  std::size_t query = 0;
  std::size_t stream = 0;
  std::size_t frame = 0;
  std::size_t point = 0;
  std::size_t view = 0;
  double u = 0.0, v = 0.0, depth = 0.0;
};

std::vector<ProjectedSamplePoint> project_sample_points(
    const QuerySet& qs, const std::vector<CameraModel>& cams, const std::vector<EgoPose>& poses,
    const std::vector<double>& timestamps, const SamplingParams& p, const SamplingConfig& cfg);

}  // namespace pillardet
