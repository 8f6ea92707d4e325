#pragma once

#include <string>

#include "wblift/losses.hpp"
#include "wblift/skeleton.hpp"

namespace wblift {

/// The six MPJPE numbers of the whole-body evaluation protocol (mm).
struct MetricReport {
  double mpjpe_all = 0;
  double mpjpe_body = 0;
  double mpjpe_face = 0;
  double mpjpe_face_aligned = 0;
  double mpjpe_hands = 0;
  double mpjpe_hands_aligned = 0;

  std::string to_json() const;
  static MetricReport from_json(const std::string& text);
  std::string to_table() const;
};

enum class Alignment { kNone, kPelvis, kNose, kPerHandWrist };

/// Subtracts the mid-hip point from every joint.
Eigen::MatrixXd align_pelvis(const Eigen::MatrixXd& pose,
                             const SkeletonTopology& topo);

/// Mean Euclidean error (mm) over samples and the joint subset, after
/// applying the alignment independently to pred and gt.
double mpjpe(const PoseBatch& pred, const PoseBatch& gt,
             std::pair<int, int> joint_range, Alignment alignment,
             const SkeletonTopology& topo);

/// Full protocol: all/body/face/hands pelvis-aligned, face nose-aligned,
/// hands per-wrist-aligned.
MetricReport evaluate(const PoseBatch& pred, const PoseBatch& gt,
                      const SkeletonTopology& topo);

}  // namespace wblift
