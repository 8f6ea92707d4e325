#pragma once

#include <vector>

#include <Eigen/Core>

#include "wblift/skeleton.hpp"

namespace wblift {

using PoseBatch = std::vector<Eigen::MatrixXd>;  // each 133 x 3

struct LossWeights {
  double alpha = 5e-1;    // 3D MSE
  double beta = 2.5e-1;   // error-prediction MSE
  double gamma = 2.5e-4;  // normal loss
  double delta = 5e-4;    // bone loss

  void validate() const;
};

struct LossReport {
  double l3d = 0, lerror = 0, lnormal = 0, lbone = 0, total = 0;
};

/// Mean squared error over batch x joints x coords. Optionally writes
/// d(loss)/d(pred) into *grad.
double l3d_loss(const PoseBatch& pred, const PoseBatch& gt,
                PoseBatch* grad = nullptr);

/// MSE between error_pred and the true error e = |gt - pred|, with e treated
/// as a constant target (no gradient flows into pred through this term).
double lerror_loss(const PoseBatch& error_pred, const PoseBatch& pred,
                   const PoseBatch& gt, PoseBatch* grad_error_pred = nullptr);

/// Unit normal of the plane through three points (right-hand rule over the
/// traversal order). Collinear points yield the zero vector.
Eigen::Vector3d triangle_normal(const Eigen::Vector3d& p0,
                                const Eigen::Vector3d& p1,
                                const Eigen::Vector3d& p2);

/// Mean over batch of (1/4) sum over limb triangles of |n_gt - n_pred|_1.
double lnormal_loss(const PoseBatch& pred, const PoseBatch& gt,
                    const SkeletonTopology& topo, PoseBatch* grad = nullptr);

/// b[i] = pose[parent[i]] - pose[i]; root's bone is zero.
Eigen::MatrixXd bone_vectors(const Eigen::MatrixXd& pose,
                             const SkeletonTopology& topo);

/// Mean over batch of (1/133) sum over bones of |b_gt - b_pred|_1.
double lbone_loss(const PoseBatch& pred, const PoseBatch& gt,
                  const SkeletonTopology& topo, PoseBatch* grad = nullptr);

/// All four terms plus the weighted total. Gradients, when requested, are of
/// the weighted total w.r.t. pred and error_pred.
LossReport total_loss(const PoseBatch& pred, const PoseBatch& error_pred,
                      const PoseBatch& gt, const SkeletonTopology& topo,
                      const LossWeights& w, PoseBatch* grad_pred = nullptr,
                      PoseBatch* grad_error_pred = nullptr);

}  // namespace wblift
