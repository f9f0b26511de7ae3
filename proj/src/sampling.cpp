#include "pillardet/sampling.hpp"

#include <cmath>

namespace pillardet {

namespace {

DenseArray as_row(const QueryFeature& feat) {
  return DenseArray({1, feat.size()}, std::vector<double>(feat));
}

}  // namespace

std::size_t SamplingConfig::total_points() const {
  if (streams.empty()) return frames * points_per_frame;
  std::size_t total = 0;
  for (const StreamSpec& s : streams) total += s.frames.size() * points_per_frame;
  return total;
}

void SamplingConfig::validate() const {
  if (frames < 1) throw ConfigError("sampling.frames must be >= 1");
  if (points_per_frame < 1) throw ConfigError("sampling.points_per_frame must be >= 1");
  if (levels < 1) throw ConfigError("sampling.levels must be >= 1");
  std::vector<bool> covered(frames, false);
  if (!streams.empty()) {
    for (const StreamSpec& s : streams) {
      if (s.frames.empty()) throw ConfigError("stream frame list must be non-empty");
      if (s.resolution_scale != 1.0 && s.resolution_scale != 0.5 && s.resolution_scale != 0.25)
        throw ConfigError("stream resolution_scale must be 1, 1/2 or 1/4");
      for (std::size_t f : s.frames) {
        if (f >= frames) throw ConfigError("stream references a frame outside 0..T-1");
        covered[f] = true;
      }
    }
    for (std::size_t f = 0; f < frames; ++f)
      if (!covered[f])
        throw ConfigError("frame " + std::to_string(f) + " is not covered by any stream");
  }
}

void SamplingParams::validate(std::size_t feat_dim, const SamplingConfig& cfg) const {
  const std::size_t n_off = cfg.frames * cfg.points_per_frame * 3;
  const std::size_t n_sw = cfg.frames * cfg.points_per_frame * cfg.levels;
  if (offset_w.rank() != 2 || offset_w.shape[0] != feat_dim || offset_w.shape[1] != n_off ||
      offset_b.numel() != n_off)
    throw ConfigError("sampling offset parameters have wrong shape");
  if (scalew_w.rank() != 2 || scalew_w.shape[0] != feat_dim || scalew_w.shape[1] != n_sw ||
      scalew_b.numel() != n_sw)
    throw ConfigError("sampling scale-weight parameters have wrong shape");
}

std::vector<SampleTask> route_streams(const SamplingConfig& cfg) {
  cfg.validate();
  std::vector<SampleTask> plan;
  if (cfg.streams.empty()) {
    for (std::size_t f = 0; f < cfg.frames; ++f) plan.push_back({0, f, 1.0});
    return plan;
  }
  for (std::size_t s = 0; s < cfg.streams.size(); ++s)
    for (std::size_t f : cfg.streams[s].frames)
      plan.push_back({s, f, cfg.streams[s].resolution_scale});
  return plan;
}

const std::vector<FeaturePyramid>& SceneFeatures::get(std::size_t frame, double scale) const {
  const auto it = by_frame_scale.find({frame, scale});
  if (it == by_frame_scale.end())
    throw ConfigError("no features rendered for frame " + std::to_string(frame));
  return it->second;
}

SceneFeatures render_for(const Scene& scene, const SamplingConfig& cfg) {
  if (cfg.frames > scene.timestamps.size())
    throw ConfigError("sampling needs more frames than the scene provides");
  SceneFeatures out;
  std::vector<std::pair<std::size_t, double>> needed;
  for (const SampleTask& task : route_streams(cfg)) {
    const std::pair<std::size_t, double> key{task.frame, task.resolution_scale};
    if (!out.by_frame_scale.count(key)) {
      out.by_frame_scale.emplace(key, std::vector<FeaturePyramid>{});
      needed.push_back(key);
    }
  }
  for (const auto& key : needed)
    out.by_frame_scale[key] = render_features(scene, key.first, key.second);
  return out;
}

DenseArray gen_offsets(const QueryFeature& feat, const SamplingParams& p,
                       const SamplingConfig& cfg) {
  p.validate(feat.size(), cfg);
  const DenseArray flat = linear(as_row(feat), p.offset_w, p.offset_b);
  return flat.reshaped({cfg.frames, cfg.points_per_frame, 3});
}

Eigen::Vector3d pillar_to_ego(const QueryBox& box, const Eigen::Vector3d& offset) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double sx = box.w * offset.x();
  const double sy = box.l * offset.y();
  const double sz = box.h * offset.z();
  return {c * sx - s * sy + box.x, s * sx + c * sy + box.y, sz + box.z};
}

Eigen::Vector3d warp_object_motion(const Eigen::Vector3d& pt, double vx, double vy, double dt) {
  return {pt.x() + vx * dt, pt.y() + vy * dt, pt.z()};
}

DenseArray scale_weights(const QueryFeature& feat, const SamplingParams& p,
                         const SamplingConfig& cfg) {
  p.validate(feat.size(), cfg);
  const DenseArray flat = linear(as_row(feat), p.scalew_w, p.scalew_b);
  return softmax(flat.reshaped({cfg.frames, cfg.points_per_frame, cfg.levels}), 2);
}

std::vector<Eigen::Vector3d> warped_points(const QueryBox& box, const DenseArray& offsets,
                                           std::size_t frame, const std::vector<EgoPose>& poses,
                                           const std::vector<double>& timestamps,
                                           const SamplingConfig& cfg) {
  const double dt = timestamps[frame] - timestamps[0];
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(cfg.points_per_frame);
  for (std::size_t i = 0; i < cfg.points_per_frame; ++i) {
    Eigen::Vector3d p = pillar_to_ego(
        box, {offsets(frame, i, 0), offsets(frame, i, 1), offsets(frame, i, 2)});
    if (cfg.align_object) p = warp_object_motion(p, box.vx, box.vy, dt);
    pts.push_back(p);
  }
  if (cfg.align_ego) return ego_align(pts, poses[0], poses[frame]);
  return pts;
}

DenseArray sample_spatiotemporal(const QueryBox& box, const QueryFeature& feat,
                                 const SceneFeatures& features,
                                 const std::vector<CameraModel>& cams,
                                 const std::vector<EgoPose>& poses,
                                 const std::vector<double>& timestamps, const SamplingParams& p,
                                 const SamplingConfig& cfg) {
  const DenseArray offsets = gen_offsets(feat, p, cfg);
  const DenseArray weights = scale_weights(feat, p, cfg);
  const std::vector<SampleTask> plan = route_streams(cfg);

  std::size_t channels = 0;
  if (!plan.empty()) {
    const auto& pyrs = features.get(plan[0].frame, plan[0].resolution_scale);
    if (pyrs.empty() || pyrs[0].levels.empty())
      throw ConfigError("sample_spatiotemporal: empty feature pyramids");
    channels = pyrs[0].levels[0].shape[0];
  }

  DenseArray out({cfg.total_points(), channels});
  std::size_t row = 0;
  std::vector<double> acc(channels);
  for (const SampleTask& task : plan) {
    const auto& pyrs = features.get(task.frame, task.resolution_scale);
    const std::vector<Eigen::Vector3d> pts =
        warped_points(box, offsets, task.frame, poses, timestamps, cfg);
    for (std::size_t i = 0; i < cfg.points_per_frame; ++i, ++row) {
      const std::vector<ViewHit> hits = view_hits(cams, pts[i]);
      if (hits.empty()) continue;  // row stays zero
      std::fill(acc.begin(), acc.end(), 0.0);
      for (const ViewHit& hit : hits) {
        const FeaturePyramid& pyr = pyrs[hit.view];
        for (std::size_t j = 0; j < cfg.levels; ++j) {
          const double lu = hit.u * task.resolution_scale / pyr.strides[j];
          const double lv = hit.v * task.resolution_scale / pyr.strides[j];
          const std::vector<double> sampled = bilinear_sample(pyr.levels[j], lu, lv);
          const double w = weights(task.frame, i, j);
          for (std::size_t c = 0; c < channels; ++c) acc[c] += w * sampled[c];
        }
      }
      const double inv = 1.0 / static_cast<double>(hits.size());
      for (std::size_t c = 0; c < channels; ++c) out(row, c) = acc[c] * inv;
    }
  }
  return out;
}

std::vector<ProjectedSamplePoint> project_sample_points(
    const QuerySet& qs, const std::vector<CameraModel>& cams, const std::vector<EgoPose>& poses,
    const std::vector<double>& timestamps, const SamplingParams& p, const SamplingConfig& cfg) {
  const std::vector<SampleTask> plan = route_streams(cfg);
  std::vector<ProjectedSamplePoint> out;
  for (std::size_t qi = 0; qi < qs.size(); ++qi) {
    const DenseArray offsets = gen_offsets(qs.features[qi], p, cfg);
    for (const SampleTask& task : plan) {
      const std::vector<Eigen::Vector3d> pts =
          warped_points(qs.boxes[qi], offsets, task.frame, poses, timestamps, cfg);
      for (std::size_t i = 0; i < cfg.points_per_frame; ++i) {
        for (const ViewHit& hit : view_hits(cams, pts[i]))
          out.push_back({qi, task.stream, task.frame, i, hit.view, hit.u, hit.v, hit.depth});
      }
    }
  }
  return out;
}

}  // namespace pillardet
