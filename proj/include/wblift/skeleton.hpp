#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace wblift {

/// Raised when an input document or array fails structural validation.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PartRanges {
  // Half-open [begin, end) index ranges into the 133-joint layout.
  std::pair<int, int> body{0, 23};
  std::pair<int, int> face{23, 91};
  std::pair<int, int> hands{91, 133};
};

/// The 133-joint whole-body kinematic layout. Immutable after load; safe to
/// share across threads.
struct SkeletonTopology {
  static constexpr int kNumJoints = 133;

  std::string version;
  int num_joints = kNumJoints;
  std::vector<int> parent;                        // parent[root] == root
  PartRanges part_ranges;
  std::vector<std::pair<int, int>> flip_pairs;    // (left, right)
  std::array<std::array<int, 3>, 4> limb_triangles{};  // L_arm, R_arm, L_leg, R_leg
  int left_hip = -1;
  int right_hip = -1;
  int nose = -1;
  int left_wrist_kp = -1;   // left hand root (keypoint 92, 1-indexed)
  int right_wrist_kp = -1;  // right hand root (keypoint 113, 1-indexed)

  /// Parses and validates a topology document (JSON text). Throws
  /// ValidationError naming the offending entry on any structural violation.
  static SkeletonTopology from_json(const std::string& json_text);

  /// Loads a topology file from disk.
  static SkeletonTopology load(const std::string& path);

  /// The topology asset shipped with the repo.
  static const SkeletonTopology& shipped();

  /// Runs every structural invariant; throws ValidationError on failure.
  void validate() const;

  int depth(int joint) const;  // root has depth 0
};

using AdjacencyMask =
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Symmetric mask with self-loops: (i,j) true iff i==j or parent-related.
AdjacencyMask build_adjacency(const SkeletonTopology& topo);

/// Permutation swapping each flip pair and fixing midline joints.
/// result[i] = index the joint at i moves to under a horizontal mirror.
std::vector<int> flip_permutation(const SkeletonTopology& topo);

}  // namespace wblift
