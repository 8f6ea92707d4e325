#include "wblift/losses.hpp"

#include <Eigen/Geometry>

namespace wblift {

namespace {

constexpr double kDegenerateEps = 1e-12;

void require_batch(const PoseBatch& pred, const PoseBatch& gt,
                   const char* what) {
  if (pred.size() != gt.size() || pred.empty())
    throw ValidationError(std::string(what) + ": batch size mismatch or empty");
  for (size_t b = 0; b < pred.size(); ++b) {
    if (pred[b].rows() != gt[b].rows() || pred[b].cols() != 3 ||
        gt[b].cols() != 3)
      throw ValidationError(std::string(what) + ": shape mismatch in sample " +
                            std::to_string(b));
  }
}

// L1 subgradient with sign(0) = 0, so pred == gt is a true stationary point.
inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma, delta})
    if (!(std::isfinite(w) && w >= 0))
      throw ValidationError("loss weights must be finite and non-negative");
}

double l3d_loss(const PoseBatch& pred, const PoseBatch& gt, PoseBatch* grad) {
  require_batch(pred, gt, "l3d");
  const double n_el =
      static_cast<double>(pred.size()) * pred[0].rows() * pred[0].cols();
  double sum = 0;
  if (grad) grad->resize(pred.size());
  for (size_t b = 0; b < pred.size(); ++b) {
    Eigen::MatrixXd diff = pred[b] - gt[b];
    sum += diff.squaredNorm();
    if (grad) (*grad)[b] = 2.0 * diff / n_el;
  }
  return sum / n_el;
}

double lerror_loss(const PoseBatch& error_pred, const PoseBatch& pred,
                   const PoseBatch& gt, PoseBatch* grad_error_pred) {
  require_batch(error_pred, pred, "lerror");
  require_batch(pred, gt, "lerror");
  const double n_el =
      static_cast<double>(pred.size()) * pred[0].rows() * pred[0].cols();
  double sum = 0;
  if (grad_error_pred) grad_error_pred->resize(pred.size());
  for (size_t b = 0; b < pred.size(); ++b) {
    Eigen::MatrixXd target = (gt[b] - pred[b]).cwiseAbs();  // constant target
    Eigen::MatrixXd diff = error_pred[b] - target;
    sum += diff.squaredNorm();
    if (grad_error_pred) (*grad_error_pred)[b] = 2.0 * diff / n_el;
  }
  return sum / n_el;
}

Eigen::Vector3d triangle_normal(const Eigen::Vector3d& p0,
                                const Eigen::Vector3d& p1,
                                const Eigen::Vector3d& p2) {
  Eigen::Vector3d u = (p1 - p0).cross(p2 - p1);
  double n = u.norm();
  if (n < kDegenerateEps) return Eigen::Vector3d::Zero();
  return u / n;
}

namespace {

// Gradient of sum_c dLdn_c * normal_c w.r.t. the three vertices; zero when
// the triangle is degenerate.
void triangle_normal_backward(const Eigen::Vector3d& p0,
                              const Eigen::Vector3d& p1,
                              const Eigen::Vector3d& p2,
                              const Eigen::Vector3d& dLdn,
                              Eigen::Vector3d& g0, Eigen::Vector3d& g1,
                              Eigen::Vector3d& g2) {
  Eigen::Vector3d a = p1 - p0, b = p2 - p1;
  Eigen::Vector3d u = a.cross(b);
  double norm = u.norm();
  g0.setZero();
  g1.setZero();
  g2.setZero();
  if (norm < kDegenerateEps) return;
  Eigen::Vector3d nvec = u / norm;
  // d(u/|u|)/du = (I - n n^T)/|u|
  Eigen::Vector3d dLdu = (dLdn - nvec * nvec.dot(dLdn)) / norm;
  // <g, da x b> = <b x g, da>, <g, a x db> = <g x a, db>
  Eigen::Vector3d dLda = b.cross(dLdu);
  Eigen::Vector3d dLdb = dLdu.cross(a);
  g0 = -dLda;
  g1 = dLda - dLdb;
  g2 = dLdb;
}

}  // namespace

double lnormal_loss(const PoseBatch& pred, const PoseBatch& gt,
                    const SkeletonTopology& topo, PoseBatch* grad) {
  require_batch(pred, gt, "lnormal");
  const double B = static_cast<double>(pred.size());
  const double M = static_cast<double>(topo.limb_triangles.size());
  double sum = 0;
  if (grad) grad->resize(pred.size());
  for (size_t b = 0; b < pred.size(); ++b) {
    if (grad) (*grad)[b] = Eigen::MatrixXd::Zero(pred[b].rows(), 3);
    for (const auto& tri : topo.limb_triangles) {
      auto at = [](const Eigen::MatrixXd& m, int i) {
        return Eigen::Vector3d(m.row(i));
      };
      Eigen::Vector3d n_gt =
          triangle_normal(at(gt[b], tri[0]), at(gt[b], tri[1]), at(gt[b], tri[2]));
      Eigen::Vector3d p0 = at(pred[b], tri[0]), p1 = at(pred[b], tri[1]),
                      p2 = at(pred[b], tri[2]);
      Eigen::Vector3d n_pred = triangle_normal(p0, p1, p2);
      Eigen::Vector3d diff = n_gt - n_pred;
      sum += diff.cwiseAbs().sum() / M;
      if (grad) {
        Eigen::Vector3d dLdn;
        for (int c = 0; c < 3; ++c) dLdn[c] = -sgn(diff[c]) / (M * B);
        Eigen::Vector3d g0, g1, g2;
        triangle_normal_backward(p0, p1, p2, dLdn, g0, g1, g2);
        (*grad)[b].row(tri[0]) += g0.transpose();
        (*grad)[b].row(tri[1]) += g1.transpose();
        (*grad)[b].row(tri[2]) += g2.transpose();
      }
    }
  }
  return sum / B;
}

Eigen::MatrixXd bone_vectors(const Eigen::MatrixXd& pose,
                             const SkeletonTopology& topo) {
  Eigen::MatrixXd bones(pose.rows(), 3);
  for (int i = 0; i < topo.num_joints; ++i)
    bones.row(i) = pose.row(topo.parent[i]) - pose.row(i);
  return bones;
}

double lbone_loss(const PoseBatch& pred, const PoseBatch& gt,
                  const SkeletonTopology& topo, PoseBatch* grad) {
  require_batch(pred, gt, "lbone");
  const double B = static_cast<double>(pred.size());
  const double L = static_cast<double>(topo.num_joints);
  double sum = 0;
  if (grad) grad->resize(pred.size());
  for (size_t b = 0; b < pred.size(); ++b) {
    Eigen::MatrixXd b_pred = bone_vectors(pred[b], topo);
    Eigen::MatrixXd b_gt = bone_vectors(gt[b], topo);
    Eigen::MatrixXd diff = b_gt - b_pred;
    sum += diff.cwiseAbs().sum() / L;
    if (grad) {
      (*grad)[b] = Eigen::MatrixXd::Zero(pred[b].rows(), 3);
      for (int i = 0; i < topo.num_joints; ++i) {
        if (topo.parent[i] == i) continue;
        for (int c = 0; c < 3; ++c) {
          // d|b_gt - b_pred|/d(b_pred) = -sign(diff); b_pred = p[parent]-p[i]
          double g = -sgn(diff(i, c)) / (L * B);
          (*grad)[b](topo.parent[i], c) += g;
          (*grad)[b](i, c) -= g;
        }
      }
    }
  }
  return sum / B;
}

LossReport total_loss(const PoseBatch& pred, const PoseBatch& error_pred,
                      const PoseBatch& gt, const SkeletonTopology& topo,
                      const LossWeights& w, PoseBatch* grad_pred,
                      PoseBatch* grad_error_pred) {
  w.validate();
  LossReport r;
  PoseBatch g3d, gnormal, gbone;
  r.l3d = l3d_loss(pred, gt, grad_pred ? &g3d : nullptr);
  r.lerror = lerror_loss(error_pred, pred, gt, grad_error_pred);
  r.lnormal = lnormal_loss(pred, gt, topo, grad_pred ? &gnormal : nullptr);
  r.lbone = lbone_loss(pred, gt, topo, grad_pred ? &gbone : nullptr);
  r.total = w.alpha * r.l3d + w.beta * r.lerror + w.gamma * r.lnormal +
            w.delta * r.lbone;
  if (grad_pred) {
    grad_pred->resize(pred.size());
    for (size_t b = 0; b < pred.size(); ++b)
      (*grad_pred)[b] =
          w.alpha * g3d[b] + w.gamma * gnormal[b] + w.delta * gbone[b];
  }
  if (grad_error_pred) {
    for (auto& g : *grad_error_pred) g *= w.beta;
  }
  return r;
}

}  // namespace wblift
