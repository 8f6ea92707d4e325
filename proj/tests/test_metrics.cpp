#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_util.hpp"
#include "wblift/metrics.hpp"

using namespace wblift;
using testutil::random_pose_batch;

namespace {

// Three-nested-loop oracle over samples, subset joints, coordinates.
double mpjpe_oracle(const PoseBatch& pred, const PoseBatch& gt, int jb, int je,
                    Alignment alignment, const SkeletonTopology& topo) {
  double sum = 0;
  for (size_t b = 0; b < pred.size(); ++b) {
    Eigen::MatrixXd p = pred[b], g = gt[b];
    auto shift_block = [](Eigen::MatrixXd& m, int begin, int end,
                          const Eigen::RowVector3d& c) {
      for (int i = begin; i < end; ++i) m.row(i) -= c;
    };
    auto align = [&](Eigen::MatrixXd& m) {
      switch (alignment) {
        case Alignment::kNone:
          break;
        case Alignment::kPelvis:
          shift_block(m, 0, topo.num_joints,
                      0.5 * (m.row(topo.left_hip) + m.row(topo.right_hip)));
          break;
        case Alignment::kNose:
          shift_block(m, 0, topo.num_joints, m.row(topo.nose));
          break;
        case Alignment::kPerHandWrist: {
          Eigen::RowVector3d l = m.row(topo.left_wrist_kp);
          Eigen::RowVector3d r = m.row(topo.right_wrist_kp);
          shift_block(m, topo.left_wrist_kp, topo.right_wrist_kp, l);
          shift_block(m, topo.right_wrist_kp, topo.num_joints, r);
          break;
        }
      }
    };
    align(p);
    align(g);
    for (int i = jb; i < je; ++i) {
      double sq = 0;
      for (int c = 0; c < 3; ++c) {
        double d = p(i, c) - g(i, c);
        sq += d * d;
      }
      sum += std::sqrt(sq);
    }
  }
  return sum / (static_cast<double>(pred.size()) * (je - jb));
}

}  // namespace

TEST_CASE("align_pelvis: centered pose unchanged, translation removed") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(1);
  Eigen::MatrixXd pose = testutil::random_matrix(topo.num_joints, 3, rng, 100);
  Eigen::MatrixXd centered = align_pelvis(pose, topo);
  CHECK((align_pelvis(centered, topo) - centered).cwiseAbs().maxCoeff() <
        1e-12);

  Eigen::MatrixXd shifted = pose.rowwise() + Eigen::RowVector3d(7, 8, 9);
  CHECK((align_pelvis(shifted, topo) - centered).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd hips = Eigen::MatrixXd::Zero(topo.num_joints, 3);
  hips.row(topo.left_hip) << 1, 0, 0;
  hips.row(topo.right_hip) << -1, 0, 0;
  CHECK((align_pelvis(hips, topo) - hips).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mpjpe: zero at pred=gt, Pythagoras offset, pelvis removal") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(3);
  PoseBatch gt = random_pose_batch(4, topo.num_joints, rng);
  for (auto a : {Alignment::kNone, Alignment::kPelvis, Alignment::kNose,
                 Alignment::kPerHandWrist}) {
    CHECK(mpjpe(gt, gt, {0, 133}, a, topo) == 0.0);
  }
  PoseBatch pred = gt;
  for (auto& p : pred) p.rowwise() += Eigen::RowVector3d(3, 0, 4);
  CHECK(mpjpe(pred, gt, {0, 133}, Alignment::kNone, topo) ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(mpjpe(pred, gt, {0, 133}, Alignment::kPelvis, topo) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("all six report entries match the loop oracle") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(7);
  PoseBatch gt = random_pose_batch(5, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(5, topo.num_joints, rng);
  MetricReport r = evaluate(pred, gt, topo);
  const auto& pr = topo.part_ranges;
  CHECK(r.mpjpe_all == doctest::Approx(mpjpe_oracle(pred, gt, 0, 133,
                                                    Alignment::kPelvis, topo))
                           .epsilon(1e-9));
  CHECK(r.mpjpe_body ==
        doctest::Approx(mpjpe_oracle(pred, gt, pr.body.first, pr.body.second,
                                     Alignment::kPelvis, topo))
            .epsilon(1e-9));
  CHECK(r.mpjpe_face ==
        doctest::Approx(mpjpe_oracle(pred, gt, pr.face.first, pr.face.second,
                                     Alignment::kPelvis, topo))
            .epsilon(1e-9));
  CHECK(r.mpjpe_face_aligned ==
        doctest::Approx(mpjpe_oracle(pred, gt, pr.face.first, pr.face.second,
                                     Alignment::kNose, topo))
            .epsilon(1e-9));
  CHECK(r.mpjpe_hands ==
        doctest::Approx(mpjpe_oracle(pred, gt, pr.hands.first, pr.hands.second,
                                     Alignment::kPelvis, topo))
            .epsilon(1e-9));
  CHECK(r.mpjpe_hands_aligned ==
        doctest::Approx(mpjpe_oracle(pred, gt, pr.hands.first, pr.hands.second,
                                     Alignment::kPerHandWrist, topo))
            .epsilon(1e-9));
}

TEST_CASE("rigid face offset: face mpjpe 10, nose-aligned 0") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(9);
  PoseBatch gt = random_pose_batch(3, topo.num_joints, rng);
  PoseBatch pred = gt;
  for (auto& p : pred)
    for (int i = topo.part_ranges.face.first; i < topo.part_ranges.face.second;
         ++i)
      p.row(i) += Eigen::RowVector3d(0, 0, 10);
  // The alignment root (nose, joint 0) moves rigidly with the face, so nose
  // alignment removes the offset while the pelvis-aligned error keeps it.
  for (auto& p : pred) p.row(topo.nose) += Eigen::RowVector3d(0, 0, 10);
  CHECK(mpjpe(pred, gt, topo.part_ranges.face, Alignment::kPelvis, topo) ==
        doctest::Approx(10.0).epsilon(1e-12));
  CHECK(mpjpe(pred, gt, topo.part_ranges.face, Alignment::kNose, topo) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pelvis metrics invariant under independent translations") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(11);
  PoseBatch gt = random_pose_batch(3, topo.num_joints, rng);
  PoseBatch pred = random_pose_batch(3, topo.num_joints, rng);
  double base = mpjpe(pred, gt, {0, 133}, Alignment::kPelvis, topo);
  PoseBatch pred2 = pred, gt2 = gt;
  for (auto& p : pred2) p.rowwise() += Eigen::RowVector3d(101, -55, 3);
  for (auto& g : gt2) g.rowwise() += Eigen::RowVector3d(-9, 77, 123);
  CHECK(mpjpe(pred2, gt2, {0, 133}, Alignment::kPelvis, topo) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("hand blocks align to their own wrists") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(13);
  PoseBatch gt = random_pose_batch(2, topo.num_joints, rng);
  PoseBatch pred = gt;
  // Rigidly offset each hand block differently; wrist alignment removes both.
  for (auto& p : pred) {
    for (int i = 91; i < 112; ++i) p.row(i) += Eigen::RowVector3d(40, 0, 0);
    for (int i = 112; i < 133; ++i) p.row(i) += Eigen::RowVector3d(0, -25, 0);
  }
  CHECK(mpjpe(pred, gt, topo.part_ranges.hands, Alignment::kPerHandWrist,
              topo) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(mpjpe(pred, gt, topo.part_ranges.hands, Alignment::kPelvis, topo) >
        10.0);
}

TEST_CASE("report serialization round-trips and renders the table shape") {
  MetricReport r;
  r.mpjpe_all = 47.87;
  r.mpjpe_body = 45.39;
  r.mpjpe_face = 36.37;
  r.mpjpe_face_aligned = 15.95;
  r.mpjpe_hands = 67.86;
  r.mpjpe_hands_aligned = 27.77;
  MetricReport rt = MetricReport::from_json(r.to_json());
  CHECK(rt.mpjpe_all == r.mpjpe_all);
  CHECK(rt.mpjpe_hands_aligned == r.mpjpe_hands_aligned);
  std::string table = r.to_table();
  CHECK(table.find("47.87") != std::string::npos);
  CHECK(table.find("36.37/15.95") != std::string::npos);
  CHECK(table.find("67.86/27.77") != std::string::npos);
}

TEST_CASE("empty subset rejected") {
  const auto& topo = SkeletonTopology::shipped();
  std::mt19937_64 rng(15);
  PoseBatch gt = random_pose_batch(1, topo.num_joints, rng);
  CHECK_THROWS_AS(mpjpe(gt, gt, {5, 5}, Alignment::kNone, topo),
                  ValidationError);
}
