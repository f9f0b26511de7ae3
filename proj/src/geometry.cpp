#include "pillardet/geometry.hpp"

#include <cmath>

namespace pillardet {

bool RigidTransform::is_rigid(double tol) const {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rotation.determinant() - 1.0) > tol) return false;
  return translation.allFinite();
}

RigidTransform RigidTransform::from_yaw(double yaw, const Eigen::Vector3d& t) {
  RigidTransform out;
  const double c = std::cos(yaw), s = std::sin(yaw);
  out.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  out.translation = t;
  return out;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform invert(const RigidTransform& a) {
  RigidTransform out;
  out.rotation = a.rotation.transpose();
  out.translation = -(a.rotation.transpose() * a.translation);
  return out;
}

Eigen::Vector3d ego_align_point(const Eigen::Vector3d& p, const EgoPose& e0, const EgoPose& et) {
  return compose(et.world_to_ego, invert(e0.world_to_ego)).apply(p);
}

std::vector<Eigen::Vector3d> ego_align(const std::vector<Eigen::Vector3d>& pts, const EgoPose& e0,
                                       const EgoPose& et) {
  const RigidTransform t = compose(et.world_to_ego, invert(e0.world_to_ego));
  std::vector<Eigen::Vector3d> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(t.apply(p));
  return out;
}

int CameraModel::level_width(std::size_t level, double resolution_scale) const {
  return static_cast<int>(
      std::ceil(static_cast<double>(image_width) * resolution_scale / strides[level]));
}

int CameraModel::level_height(std::size_t level, double resolution_scale) const {
  return static_cast<int>(
      std::ceil(static_cast<double>(image_height) * resolution_scale / strides[level]));
}

void CameraModel::validate() const {
  if (fx <= 0.0 || fy <= 0.0) throw ConfigError("camera focal lengths must be positive");
  if (image_width < 1 || image_height < 1) throw ConfigError("camera image extents must be positive");
  if (strides.empty()) throw ConfigError("camera needs at least one feature level");
  for (std::size_t j = 0; j < strides.size(); ++j) {
    if (strides[j] < 1) throw ConfigError("camera strides must be positive");
    if (j > 0 && strides[j] <= strides[j - 1])
      throw ConfigError("camera strides must be strictly increasing");
  }
  if (!camera_from_ego.is_rigid()) throw ConfigError("camera extrinsics are not a rigid transform");
}

Projection project(const CameraModel& cam, const Eigen::Vector3d& p_ego) {
  Projection out;
  const Eigen::Vector3d p_cam = cam.camera_from_ego.apply(p_ego);
  out.depth = p_cam.z();
  if (out.depth <= 1e-6) return out;  // behind or grazing the image plane
  out.u = cam.fx * p_cam.x() / p_cam.z() + cam.cx;
  out.v = cam.fy * p_cam.y() / p_cam.z() + cam.cy;
  out.hit = out.u >= 0.0 && out.u < static_cast<double>(cam.image_width) && out.v >= 0.0 &&
            out.v < static_cast<double>(cam.image_height);
  return out;
}

std::vector<ViewHit> view_hits(const std::vector<CameraModel>& cams,
                               const Eigen::Vector3d& p_ego) {
  std::vector<ViewHit> hits;
  for (std::size_t k = 0; k < cams.size(); ++k) {
    const Projection p = project(cams[k], p_ego);
    if (p.hit) hits.push_back({k, p.u, p.v, p.depth});
  }
  return hits;
}

}  // namespace pillardet
