#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pillardet/common.hpp"

namespace pillardet {

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  bool is_rigid(double tol = 1e-9) const;

  static RigidTransform identity() { return {}; }
  // Rotation by yaw about +z followed by the given translation.
  static RigidTransform from_yaw(double yaw, const Eigen::Vector3d& t);
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& a);

// World -> ego-local transform at a timestamp.
struct EgoPose {
  RigidTransform world_to_ego;
  double timestamp = 0.0;
};

// Maps points given in frame-0 ego coordinates into frame-t ego coordinates:
// ego0 -> world -> ego_t.
Eigen::Vector3d ego_align_point(const Eigen::Vector3d& p, const EgoPose& e0, const EgoPose& et);
std::vector<Eigen::Vector3d> ego_align(const std::vector<Eigen::Vector3d>& pts, const EgoPose& e0,
                                       const EgoPose& et);

// Pinhole camera with multi-level feature-map strides.
struct CameraModel {
  RigidTransform camera_from_ego;
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  int image_width = 1, image_height = 1;
  std::vector<int> strides;  // strictly increasing

  int level_width(std::size_t level, double resolution_scale = 1.0) const;
  int level_height(std::size_t level, double resolution_scale = 1.0) const;
  void validate() const;
};

struct Projection {
  double u = 0.0, v = 0.0;  // full-resolution pixels
  double depth = 0.0;       // meters along the optical axis
  bool hit = false;
};

// hit iff depth > 1e-6 and (u, v) lies inside the full-resolution image
// rectangle. Misses are reported via the flag, never by failure.
Projection project(const CameraModel& cam, const Eigen::Vector3d& p_ego);

struct ViewHit {
  std::size_t view = 0;
  double u = 0.0, v = 0.0, depth = 0.0;
};

std::vector<ViewHit> view_hits(const std::vector<CameraModel>& cams, const Eigen::Vector3d& p_ego);

}  // namespace pillardet
