#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wblift/features.hpp"
#include "wblift/losses.hpp"
#include "wblift/skeleton.hpp"

namespace wblift {

struct CameraSpec {
  double fx = 1000.0, fy = 1000.0;
  double cx = 500.0, cy = 500.0;
  double image_w = 1000.0, image_h = 1000.0;

  /// Pinhole projection of an absolute 3D point (mm, camera frame) to pixels.
  Eigen::Vector2d project(const Eigen::Vector3d& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }
};

struct Dataset {
  std::vector<PoseSample> samples;
  std::string split_tag;  // train | test | synthetic
  std::set<std::string> subjects;
  double image_w = 1000.0, image_h = 1000.0;
  std::optional<CameraSpec> camera;  // synthetic sets carry their camera
  // Absolute pelvis position per sample (camera frame, mm); synthetic only.
  std::vector<Eigen::Vector3d> roots_3d;
  // Bookkeeping: loaded + filtered == scanned.
  int scanned = 0, loaded = 0, filtered = 0;

  int size() const { return static_cast<int>(samples.size()); }
};

/// Subject filter; empty set means "all subjects".
struct SplitSpec {
  std::set<std::string> subjects;
  bool require_3d = true;
};

/// Loads a dataset file in the internal JSON format.
Dataset load_h3wb(const std::string& path, const SplitSpec& spec);

/// Writes the internal JSON format. Output is byte-deterministic.
void save_dataset(const Dataset& ds, const std::string& path);

/// Converts an upstream H3WB release file to the internal format.
void convert_h3wb(const std::string& in_path, const std::string& out_path,
                  const SkeletonTopology& topo);

/// Fixed per-joint bone lengths (mm) used by the synthetic generator.
Eigen::VectorXd synthetic_bone_lengths(const SkeletonTopology& topo);

/// Generates n kinematically consistent poses: fixed bone lengths, random
/// joint directions, pinhole projection. Deterministic per seed. 3D is stored
/// pelvis-relative in mm; roots_3d holds the subtracted pelvis positions.
Dataset synthesize(int n, uint64_t seed, const CameraSpec& camera,
                   const SkeletonTopology& topo);

/// Joints in parent-before-child order (root first).
std::vector<int> topological_order(const SkeletonTopology& topo);

/// One epoch of shuffled batch index lists; the final partial batch is kept.
std::vector<std::vector<int>> shuffled_batches(int n, int batch_size,
                                               uint64_t seed);

struct Batch {
  Eigen::MatrixXd input;   // (B*133) x 3 assembled model input
  PoseBatch target;        // ground-truth 3D, root-relative mm
  std::vector<int> indices;
};

Batch make_batch(const Dataset& ds, const std::vector<int>& indices,
                 const SkeletonTopology& topo);

}  // namespace wblift
