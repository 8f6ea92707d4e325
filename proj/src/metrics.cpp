#include "wblift/metrics.hpp"

#include <sstream>

#include <json.hpp>

namespace wblift {

using nlohmann::json;

std::string MetricReport::to_json() const {
  json j;
  j["units"] = "mm";
  j["mpjpe_all"] = mpjpe_all;
  j["mpjpe_body"] = mpjpe_body;
  j["mpjpe_face"] = mpjpe_face;
  j["mpjpe_face_aligned"] = mpjpe_face_aligned;
  j["mpjpe_hands"] = mpjpe_hands;
  j["mpjpe_hands_aligned"] = mpjpe_hands_aligned;
  return j.dump(1);
}

MetricReport MetricReport::from_json(const std::string& text) {
  json j = json::parse(text);
  MetricReport r;
  r.mpjpe_all = j.at("mpjpe_all").get<double>();
  r.mpjpe_body = j.at("mpjpe_body").get<double>();
  r.mpjpe_face = j.at("mpjpe_face").get<double>();
  r.mpjpe_face_aligned = j.at("mpjpe_face_aligned").get<double>();
  r.mpjpe_hands = j.at("mpjpe_hands").get<double>();
  r.mpjpe_hands_aligned = j.at("mpjpe_hands_aligned").get<double>();
  return r;
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "MPJPE (mm)  All     Body    Face/Aligned    Hands/Aligned\n"
     << "            " << mpjpe_all << "   " << mpjpe_body << "   "
     << mpjpe_face << "/" << mpjpe_face_aligned << "     " << mpjpe_hands
     << "/" << mpjpe_hands_aligned << "\n";
  return os.str();
}

Eigen::MatrixXd align_pelvis(const Eigen::MatrixXd& pose,
                             const SkeletonTopology& topo) {
  Eigen::RowVector3d pelvis =
      0.5 * (pose.row(topo.left_hip) + pose.row(topo.right_hip));
  return pose.rowwise() - pelvis;
}

namespace {

Eigen::MatrixXd apply_alignment(const Eigen::MatrixXd& pose,
                                Alignment alignment,
                                const SkeletonTopology& topo) {
  switch (alignment) {
    case Alignment::kNone:
      return pose;
    case Alignment::kPelvis:
      return align_pelvis(pose, topo);
    case Alignment::kNose: {
      Eigen::RowVector3d c = pose.row(topo.nose);
      return pose.rowwise() - c;
    }
    case Alignment::kPerHandWrist: {
      // Each hand block is aligned to its own root joint.
      Eigen::MatrixXd out = pose;
      const int lh = topo.left_wrist_kp, rh = topo.right_wrist_kp;
      const auto [hb, he] = topo.part_ranges.hands;
      Eigen::RowVector3d lroot = pose.row(lh), rroot = pose.row(rh);
      for (int i = hb; i < he; ++i)
        out.row(i) -= (i < rh) ? lroot : rroot;
      return out;
    }
  }
  throw ValidationError("mpjpe: unknown alignment");
}

}  // namespace

double mpjpe(const PoseBatch& pred, const PoseBatch& gt,
             std::pair<int, int> joint_range, Alignment alignment,
             const SkeletonTopology& topo) {
  if (pred.size() != gt.size() || pred.empty())
    throw ValidationError("mpjpe: batch size mismatch or empty");
  const int jb = joint_range.first, je = joint_range.second;
  if (je <= jb) throw ValidationError("mpjpe: empty joint subset");
  double sum = 0;
  for (size_t b = 0; b < pred.size(); ++b) {
    Eigen::MatrixXd p = apply_alignment(pred[b], alignment, topo);
    Eigen::MatrixXd g = apply_alignment(gt[b], alignment, topo);
    for (int i = jb; i < je; ++i) sum += (p.row(i) - g.row(i)).norm();
  }
  return sum / (static_cast<double>(pred.size()) * (je - jb));
}

MetricReport evaluate(const PoseBatch& pred, const PoseBatch& gt,
                      const SkeletonTopology& topo) {
  MetricReport r;
  const auto& pr = topo.part_ranges;
  r.mpjpe_all = mpjpe(pred, gt, {0, topo.num_joints}, Alignment::kPelvis, topo);
  r.mpjpe_body = mpjpe(pred, gt, pr.body, Alignment::kPelvis, topo);
  r.mpjpe_face = mpjpe(pred, gt, pr.face, Alignment::kPelvis, topo);
  r.mpjpe_face_aligned = mpjpe(pred, gt, pr.face, Alignment::kNose, topo);
  r.mpjpe_hands = mpjpe(pred, gt, pr.hands, Alignment::kPelvis, topo);
  r.mpjpe_hands_aligned =
      mpjpe(pred, gt, pr.hands, Alignment::kPerHandWrist, topo);
  return r;
}

}  // namespace wblift
