#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_util.hpp"
#include "wblift/losses.hpp"

using namespace wblift;
using testutil::central_diff;
using testutil::random_pose_batch;
using testutil::rel_err;

namespace {

// Brute-force loop oracles, independent of the library implementations.
double l3d_oracle(const PoseBatch& pred, const PoseBatch& gt) {
  double sum = 0;
  long n = 0;
  for (size_t b = 0; b < pred.size(); ++b)
    for (int i = 0; i < pred[b].rows(); ++i)
      for (int c = 0; c < 3; ++c) {
        double d = pred[b](i, c) - gt[b](i, c);
        sum += d * d;
        ++n;
      }
  return sum / static_cast<double>(n);
}

double lbone_oracle(const PoseBatch& pred, const PoseBatch& gt,
                    const SkeletonTopology& topo) {
  double total = 0;
  for (size_t b = 0; b < pred.size(); ++b) {
    double s = 0;
    for (int i = 0; i < topo.num_joints; ++i)
      for (int c = 0; c < 3; ++c) {
        double bg = gt[b](topo.parent[i], c) - gt[b](i, c);
        double bp = pred[b](topo.parent[i], c) - pred[b](i, c);
        s += std::abs(bg - bp);
      }
    total += s / topo.num_joints;
  }
  return total / static_cast<double>(pred.size());
}

Eigen::Vector3d normal_oracle(const Eigen::Vector3d& p0,
                              const Eigen::Vector3d& p1,
                              const Eigen::Vector3d& p2) {
  Eigen::Vector3d a = p1 - p0, b = p2 - p1;
  Eigen::Vector3d u(a.y() * b.z() - a.z() * b.y(),
                    a.z() * b.x() - a.x() * b.z(),
                    a.x() * b.y() - a.y() * b.x());
  double n = u.norm();
  return n < 1e-12 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(u / n);
}

double lnormal_oracle(const PoseBatch& pred, const PoseBatch& gt,
                      const SkeletonTopology& topo) {
  double total = 0;
  for (size_t b = 0; b < pred.size(); ++b) {
    double s = 0;
    for (const auto& tri : topo.limb_triangles) {
      auto v = [](const Eigen::MatrixXd& m, int i) {
        return Eigen::Vector3d(m.row(i));
      };
      Eigen::Vector3d ng = normal_oracle(v(gt[b], tri[0]), v(gt[b], tri[1]),
                                         v(gt[b], tri[2]));
      Eigen::Vector3d np = normal_oracle(v(pred[b], tri[0]), v(pred[b], tri[1]),
                                         v(pred[b], tri[2]));
      s += (ng - np).cwiseAbs().sum();
    }
    total += s / 4.0;
  }
  return total / static_cast<double>(pred.size());
}

}  // namespace

TEST_CASE("l3d: zero at pred=gt, 4 at constant offset 2, matches oracle") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(5);
  PoseBatch gt = random_pose_batch(3, topo.num_joints, rng);
  CHECK(l3d_loss(gt, gt) == 0.0);

  PoseBatch off = gt;
  for (auto& p : off) p.array() += 2.0;
  CHECK(l3d_loss(off, gt) == doctest::Approx(4.0).epsilon(1e-12));

  for (int trial = 0; trial < 5; ++trial) {
    PoseBatch pred = random_pose_batch(3, topo.num_joints, rng);
    CHECK(l3d_loss(pred, gt) ==
          doctest::Approx(l3d_oracle(pred, gt)).epsilon(1e-10));
  }
}

TEST_CASE("l3d gradient matches finite differences") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(7);
  PoseBatch gt = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch grad;
  l3d_loss(pred, gt, &grad);
  for (int k = 0; k < 20; ++k) {
    int b = k % 2, i = (k * 13) % 133, c = k % 3;
    // The loss is quadratic, so central differences are exact up to
    // round-off; a larger step avoids cancellation.
    double fd = central_diff([&] { return l3d_loss(pred, gt); },
                             pred[b](i, c), 1e-2);
    CHECK(rel_err(fd, grad[b](i, c)) < 1e-6);
  }
}

TEST_CASE("lerror: exact target gives zero; single-element arithmetic") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(9);
  PoseBatch gt = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch exact(2);
  for (int b = 0; b < 2; ++b) exact[b] = (gt[b] - pred[b]).cwiseAbs();
  CHECK(lerror_loss(exact, pred, gt) == 0.0);

  PoseBatch zeros(2);
  for (auto& z : zeros) z = Eigen::MatrixXd::Zero(topo.num_joints, 3);
  CHECK(lerror_loss(zeros, gt, gt) == 0.0);

  // gt=1, pred=0.5 in one element, everything else equal: e=0.5, per-element
  // squared error 0.25 averaged over all elements.
  PoseBatch g1 = zeros, p1 = zeros, e1 = zeros;
  g1[0](0, 0) = 1.0;
  p1[0](0, 0) = 0.5;
  const double n_el = 2.0 * topo.num_joints * 3;
  CHECK(lerror_loss(e1, p1, g1) == doctest::Approx(0.25 / n_el).epsilon(1e-12));
}

TEST_CASE("lerror passes no gradient into pred") {
  // The analytic gradient of lerror w.r.t. pred is zero by the
  // constant-target convention; the exposed API only produces a gradient
  // for error_pred, which must match finite differences.
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(13);
  PoseBatch gt = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch ep = random_pose_batch(2, topo.num_joints, rng, 10.0);
  PoseBatch grad_ep;
  lerror_loss(ep, pred, gt, &grad_ep);
  for (int k = 0; k < 10; ++k) {
    int b = k % 2, i = (k * 31) % 133, c = k % 3;
    double fd = central_diff([&] { return lerror_loss(ep, pred, gt); },
                             ep[b](i, c), 1e-2);
    CHECK(rel_err(fd, grad_ep[b](i, c)) < 1e-6);
  }
}

TEST_CASE("triangle_normal basics") {
  Eigen::Vector3d n = triangle_normal({0, 0, 0}, {1, 0, 0}, {1, 1, 0});
  CHECK((n - Eigen::Vector3d(0, 0, 1)).norm() == doctest::Approx(0.0));
  Eigen::Vector3d nr = triangle_normal({0, 0, 0}, {1, 1, 0}, {1, 0, 0});
  CHECK((nr + n).norm() == doctest::Approx(0.0));
  Eigen::Vector3d nc = triangle_normal({0, 0, 0}, {1, 0, 0}, {2, 0, 0});
  CHECK(nc.norm() == 0.0);
  CHECK(nc.allFinite());
}

TEST_CASE("lnormal: zero at pred=gt, mirrored plane, translation invariance") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(15);
  PoseBatch gt = random_pose_batch(1, topo.num_joints, rng);
  CHECK(lnormal_loss(gt, gt, topo) == 0.0);

  // Mirror one limb's plane across z: normal flips sign in z only if the
  // triangle lies suitably; construct it explicitly instead.
  PoseBatch g(1), p(1);
  g[0] = Eigen::MatrixXd::Zero(topo.num_joints, 3);
  // Give every limb triangle a well-defined plane.
  for (const auto& tri : topo.limb_triangles) {
    g[0].row(tri[0]) << 0, 0, 0;
    g[0].row(tri[1]) << 1, 0, 0;
    g[0].row(tri[2]) << 1, 1, 0;  // normal (0,0,1)
  }
  p[0] = g[0];
  // Mirror the first limb triangle's traversal so n_pred = (0,0,-1).
  const auto& t0 = topo.limb_triangles[0];
  p[0].row(t0[1]) << 1, 1, 0;
  p[0].row(t0[2]) << 1, 0, 0;
  CHECK(lnormal_loss(p, g, topo) == doctest::Approx(0.5).epsilon(1e-12));

  PoseBatch shifted = g;
  shifted[0].rowwise() += Eigen::RowVector3d(10, 10, 10);
  CHECK(lnormal_loss(shifted, g, topo) == 0.0);
}

TEST_CASE("lnormal matches oracle and finite differences") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    PoseBatch gt = random_pose_batch(3, topo.num_joints, rng);
    PoseBatch pred = random_pose_batch(3, topo.num_joints, rng);
    CHECK(lnormal_loss(pred, gt, topo) ==
          doctest::Approx(lnormal_oracle(pred, gt, topo)).epsilon(1e-9));
  }
  PoseBatch gt = random_pose_batch(1, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(1, topo.num_joints, rng);
  PoseBatch grad;
  lnormal_loss(pred, gt, topo, &grad);
  for (const auto& tri : topo.limb_triangles)
    for (int v = 0; v < 3; ++v)
      for (int c = 0; c < 3; ++c) {
        double fd = central_diff([&] { return lnormal_loss(pred, gt, topo); },
                                 pred[0](tri[v], c), 1e-6);
        CHECK(rel_err(fd, grad[0](tri[v], c)) < 1e-4);
      }
}

TEST_CASE("bone_vectors: direction into parent, root zero, translation invariant") {
  const auto& topo = SkeletonTopology::shipped();
  Eigen::MatrixXd pose = Eigen::MatrixXd::Zero(topo.num_joints, 3);
  pose(1, 0) = 1.0;  // joint 1 at (1,0,0), its parent (nose) at origin
  Eigen::MatrixXd bones = bone_vectors(pose, topo);
  CHECK(bones(1, 0) == -1.0);
  CHECK(bones.row(topo.nose).norm() == 0.0);

  std::mt19937_64 rng(21);
  Eigen::MatrixXd p = testutil::random_matrix(topo.num_joints, 3, rng, 50.0);
  Eigen::MatrixXd shifted = p.rowwise() + Eigen::RowVector3d(3, -7, 11);
  CHECK((bone_vectors(p, topo) - bone_vectors(shifted, topo))
            .cwiseAbs()
            .maxCoeff() < 1e-12);
}

TEST_CASE("lbone: zero at pred=gt, translation invariant, toy value, oracle") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(25);
  PoseBatch gt = random_pose_batch(2, topo.num_joints, rng);
  CHECK(lbone_loss(gt, gt, topo) == 0.0);

  PoseBatch off = gt;
  for (auto& p : off) p.rowwise() += Eigen::RowVector3d(5, 6, 7);
  CHECK(lbone_loss(off, gt, topo) < 1e-13);

  // One bone differs: gt bone (1,0,0) vs pred bone (0,1,0) -> L1 diff 2.
  // Joint 3 (left ear) is a leaf, so moving it touches exactly one bone.
  PoseBatch g(1), p(1);
  g[0] = Eigen::MatrixXd::Zero(topo.num_joints, 3);
  p[0] = g[0];
  g[0](3, 0) = -1.0;  // bone = parent - joint = (1,0,0)
  p[0](3, 1) = -1.0;  // bone = (0,1,0)
  CHECK(lbone_loss(p, g, topo) == doctest::Approx(2.0 / 133).epsilon(1e-12));

  for (int trial = 0; trial < 5; ++trial) {
    PoseBatch a = random_pose_batch(3, topo.num_joints, rng);
    PoseBatch b = random_pose_batch(3, topo.num_joints, rng);
    CHECK(lbone_loss(a, b, topo) ==
          doctest::Approx(lbone_oracle(a, b, topo)).epsilon(1e-9));
  }
}

TEST_CASE("lbone gradient matches finite differences") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(27);
  PoseBatch gt = random_pose_batch(1, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(1, topo.num_joints, rng);
  PoseBatch grad;
  lbone_loss(pred, gt, topo, &grad);
  // L1 terms are piecewise linear; keep a margin from the sign kinks of
  // every bone the perturbed coordinate touches.
  Eigen::MatrixXd diff =
      bone_vectors(gt[0], topo) - bone_vectors(pred[0], topo);
  auto has_margin = [&](int i, int c) {
    if (topo.parent[i] != i && std::abs(diff(i, c)) < 1e-3) return false;
    for (int j = 0; j < topo.num_joints; ++j)
      if (topo.parent[j] == i && j != i && std::abs(diff(j, c)) < 1e-3)
        return false;
    return true;
  };
  for (int k = 0; k < 40; ++k) {
    int i = (k * 29) % 133, c = k % 3;
    if (!has_margin(i, c)) continue;
    double fd = central_diff([&] { return lbone_loss(pred, gt, topo); },
                             pred[0](i, c), 1e-6);
    // Sign contributions can cancel to an exact zero slope; then the FD
    // value is pure round-off, so allow an absolute floor.
    CHECK((rel_err(fd, grad[0](i, c)) < 1e-5 ||
           std::abs(fd - grad[0](i, c)) < 1e-7));
  }
}

TEST_CASE("total_loss: zero point, weight selection, recombination") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(31);
  PoseBatch gt = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch zeros(2);
  for (auto& z : zeros) z = Eigen::MatrixXd::Zero(topo.num_joints, 3);

  LossWeights w;
  LossReport r = total_loss(gt, zeros, gt, topo, w);
  CHECK(r.l3d == 0.0);
  CHECK(r.lerror == 0.0);
  CHECK(r.lnormal == 0.0);
  CHECK(r.lbone == 0.0);
  CHECK(r.total == 0.0);

  PoseBatch pred = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch ep = random_pose_batch(2, topo.num_joints, rng, 10.0);
  LossWeights only3d{1, 0, 0, 0};
  CHECK(total_loss(pred, ep, gt, topo, only3d).total ==
        doctest::Approx(l3d_loss(pred, gt)).epsilon(1e-12));

  LossReport rr = total_loss(pred, ep, gt, topo, w);
  CHECK(rr.total == doctest::Approx(w.alpha * rr.l3d + w.beta * rr.lerror +
                                    w.gamma * rr.lnormal + w.delta * rr.lbone)
                        .epsilon(1e-9));
  CHECK(rr.l3d >= 0);
  CHECK(rr.lerror >= 0);
  CHECK(rr.lnormal >= 0);
  CHECK(rr.lbone >= 0);
}

TEST_CASE("total_loss gradient combines the term gradients") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(33);
  PoseBatch gt = random_pose_batch(1, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(1, topo.num_joints, rng);
  PoseBatch ep = random_pose_batch(1, topo.num_joints, rng, 10.0);
  // beta = 0 for the pred check: the real lerror varies with pred, but the
  // analytic gradient treats its target as a constant by convention.
  LossWeights w;
  w.beta = 0;
  PoseBatch gp, ge;
  total_loss(pred, ep, gt, topo, w, &gp, &ge);
  for (int k = 0; k < 15; ++k) {
    int i = (k * 17) % 133, c = k % 3;
    double fd = central_diff(
        [&] { return total_loss(pred, ep, gt, topo, w).total; }, pred[0](i, c),
        1e-4);
    CHECK(rel_err(fd, gp[0](i, c)) < 1e-4);
  }
  LossWeights wfull;
  PoseBatch gp2, ge2;
  total_loss(pred, ep, gt, topo, wfull, &gp2, &ge2);
  for (int k = 0; k < 15; ++k) {
    int i = (k * 17) % 133, c = k % 3;
    double fde = central_diff(
        [&] { return total_loss(pred, ep, gt, topo, wfull).total; },
        ep[0](i, c), 1e-2);
    CHECK(rel_err(fde, ge2[0](i, c)) < 1e-6);
  }
}

TEST_CASE("negative loss weights are rejected") {
  LossWeights w;
  w.gamma = -1;
  CHECK_THROWS_AS(w.validate(), ValidationError);
}
