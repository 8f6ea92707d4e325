#include "wblift/features.hpp"

namespace wblift {

namespace {

void require_shape(const Eigen::MatrixXd& m, int rows, int cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw ValidationError(std::string(what) + ": expected " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite())
    throw ValidationError(std::string(what) + ": contains NaN/Inf");
}

}  // namespace

void PoseSample::validate(const SkeletonTopology& topo) const {
  require_shape(joints_2d, topo.num_joints, 2, "joints_2d");
  require_finite(joints_2d, "joints_2d");
  if (joints_3d_gt) {
    require_shape(*joints_3d_gt, topo.num_joints, 3, "joints_3d_gt");
    require_finite(*joints_3d_gt, "joints_3d_gt");
  }
}

Pose2d normalize_2d(const Pose2d& joints_2d, double image_w, double image_h) {
  if (image_w <= 0 || image_h <= 0)
    throw ValidationError("normalize_2d: image dimensions must be positive");
  const double half = std::max(image_w, image_h) / 2.0;
  Pose2d out = joints_2d;
  out.col(0).array() -= image_w / 2.0;
  out.col(1).array() -= image_h / 2.0;
  out /= half;
  return out;
}

Eigen::VectorXd compute_distances(const Pose2d& joints_2d,
                                  const SkeletonTopology& topo) {
  require_shape(joints_2d, topo.num_joints, 2, "compute_distances");
  require_finite(joints_2d, "compute_distances");
  Eigen::VectorXd d(topo.num_joints);
  for (int i = 0; i < topo.num_joints; ++i)
    d[i] = (joints_2d.row(i) - joints_2d.row(topo.parent[i])).norm();
  return d;
}

ModelInput assemble_input(const Pose2d& joints_2d, const SkeletonTopology& topo,
                          double image_w, double image_h) {
  Pose2d norm = normalize_2d(joints_2d, image_w, image_h);
  Eigen::VectorXd d = compute_distances(norm, topo);
  ModelInput input;
  input.features.resize(topo.num_joints, 3);
  input.features.leftCols<2>() = norm;
  input.features.col(2) = d;
  return input;
}

namespace {

Eigen::MatrixXd flip_pose(const Eigen::MatrixXd& pose,
                          const SkeletonTopology& topo) {
  const auto perm = flip_permutation(topo);
  Eigen::MatrixXd out(pose.rows(), pose.cols());
  for (int i = 0; i < topo.num_joints; ++i) out.row(perm[i]) = pose.row(i);
  out.col(0) = -out.col(0);
  return out;
}

}  // namespace

Pose2d flip_2d(const Pose2d& joints_2d, const SkeletonTopology& topo) {
  require_shape(joints_2d, topo.num_joints, 2, "flip_2d");
  return flip_pose(joints_2d, topo);
}

Pose3d flip_3d(const Pose3d& joints_3d, const SkeletonTopology& topo) {
  require_shape(joints_3d, topo.num_joints, 3, "flip_3d");
  return flip_pose(joints_3d, topo);
}

}  // namespace wblift
