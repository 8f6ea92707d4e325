#pragma once

#include <optional>
#include <string>

#include <Eigen/Core>

#include "wblift/skeleton.hpp"

namespace wblift {

using Pose2d = Eigen::MatrixXd;  // 133 x 2
using Pose3d = Eigen::MatrixXd;  // 133 x 3

/// One training/eval item. 2D in pixels (or already-normalized units),
/// 3D ground truth in root-relative millimeters.
struct PoseSample {
  Pose2d joints_2d;                 // 133 x 2
  std::optional<Pose3d> joints_3d_gt;  // 133 x 3
  std::string subject_id;
  std::string frame_id;

  void validate(const SkeletonTopology& topo) const;
};

/// Network input: per-joint (x, y, d) with x,y normalized and d the
/// parent-relative distance of the normalized coordinates.
struct ModelInput {
  Eigen::MatrixXd features;  // 133 x 3
};

/// Maps pixel coordinates into [-1,1]: center on the image center, divide by
/// half the larger image dimension.
Pose2d normalize_2d(const Pose2d& joints_2d, double image_w, double image_h);

/// D[i] = |J[i] - J[parent[i]]|; D[root] = 0. Throws ValidationError on
/// non-finite input.
Eigen::VectorXd compute_distances(const Pose2d& joints_2d,
                                  const SkeletonTopology& topo);

/// Normalizes, then appends the distance channel of the normalized coords.
ModelInput assemble_input(const Pose2d& joints_2d, const SkeletonTopology& topo,
                          double image_w, double image_h);

/// Horizontal mirror of a normalized 2D pose: negate x, permute flip pairs.
Pose2d flip_2d(const Pose2d& joints_2d, const SkeletonTopology& topo);

/// Horizontal mirror of a root-relative 3D pose.
Pose3d flip_3d(const Pose3d& joints_3d, const SkeletonTopology& topo);

}  // namespace wblift
