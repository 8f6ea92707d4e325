#include "wblift/data.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace wblift {

using nlohmann::json;

namespace {

using Rng = std::mt19937_64;

constexpr const char* kFormatVersion = "wblift-dataset/v1";

json pose_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd pose_from_json(const json& rows, int expect_cols,
                               const std::string& sample_id) {
  Eigen::MatrixXd m(rows.size(), expect_cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (static_cast<int>(row.size()) != expect_cols)
      throw ValidationError("dataset: sample '" + sample_id + "' joint " +
                            std::to_string(i) + " has " +
                            std::to_string(row.size()) + " coords, expected " +
                            std::to_string(expect_cols));
    for (int j = 0; j < expect_cols; ++j) m(i, j) = row[j].get<double>();
  }
  return m;
}

}  // namespace

Dataset load_h3wb(const std::string& path, const SplitSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ValidationError("dataset: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("dataset: malformed JSON in '" + path + "': " +
                          e.what());
  }

  Dataset ds;
  try {
    if (doc.at("format_version").get<std::string>() != kFormatVersion)
      throw ValidationError("dataset: unknown format_version in '" + path + "'");
    ds.split_tag = doc.at("split").get<std::string>();
    auto sz = doc.at("image_size").get<std::vector<double>>();
    ds.image_w = sz.at(0);
    ds.image_h = sz.at(1);
    if (doc.contains("camera")) {
      CameraSpec cam;
      const auto& c = doc["camera"];
      cam.fx = c.at("fx");
      cam.fy = c.at("fy");
      cam.cx = c.at("cx");
      cam.cy = c.at("cy");
      cam.image_w = ds.image_w;
      cam.image_h = ds.image_h;
      ds.camera = cam;
    }

    for (const auto& [id, s] : doc.at("samples").items()) {
      ++ds.scanned;
      const std::string subject =
          s.contains("subject") ? s["subject"].get<std::string>() : "unknown";
      if (!spec.subjects.empty() && !spec.subjects.count(subject)) {
        ++ds.filtered;
        continue;
      }
      PoseSample sample;
      sample.frame_id = id;
      sample.subject_id = subject;
      const auto& j2d = s.at("joints_2d");
      if (static_cast<int>(j2d.size()) != SkeletonTopology::kNumJoints)
        throw ValidationError("dataset: sample '" + id + "' has " +
                              std::to_string(j2d.size()) +
                              " keypoints, expected 133");
      sample.joints_2d = pose_from_json(j2d, 2, id);
      if (s.contains("joints_3d")) {
        const auto& j3d = s["joints_3d"];
        if (static_cast<int>(j3d.size()) != SkeletonTopology::kNumJoints)
          throw ValidationError("dataset: sample '" + id + "' has " +
                                std::to_string(j3d.size()) +
                                " 3D keypoints, expected 133");
        sample.joints_3d_gt = pose_from_json(j3d, 3, id);
      } else if (spec.require_3d) {
        throw ValidationError("dataset: sample '" + id +
                              "' is missing joints_3d required by this split");
      }
      if (!sample.joints_2d.allFinite() ||
          (sample.joints_3d_gt && !sample.joints_3d_gt->allFinite()))
        throw ValidationError("dataset: sample '" + id + "' has NaN/Inf joints");
      if (s.contains("root_3d")) {
        auto r = s["root_3d"].get<std::vector<double>>();
        ds.roots_3d.emplace_back(r.at(0), r.at(1), r.at(2));
      }
      ds.subjects.insert(subject);
      ds.samples.push_back(std::move(sample));
      ++ds.loaded;
    }
  } catch (const json::exception& e) {
    throw ValidationError("dataset: missing or mistyped field in '" + path +
                          "': " + e.what());
  }
  if (!ds.roots_3d.empty() && ds.roots_3d.size() != ds.samples.size())
    throw ValidationError("dataset: root_3d present on only some samples");
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["split"] = ds.split_tag;
  doc["image_size"] = {ds.image_w, ds.image_h};
  if (ds.camera) {
    doc["camera"] = {{"fx", ds.camera->fx},
                     {"fy", ds.camera->fy},
                     {"cx", ds.camera->cx},
                     {"cy", ds.camera->cy}};
  }
  json samples = json::object();
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    json rec;
    rec["subject"] = s.subject_id;
    rec["joints_2d"] = pose_to_json(s.joints_2d);
    if (s.joints_3d_gt) rec["joints_3d"] = pose_to_json(*s.joints_3d_gt);
    if (i < ds.roots_3d.size())
      rec["root_3d"] = {ds.roots_3d[i].x(), ds.roots_3d[i].y(),
                        ds.roots_3d[i].z()};
    samples[s.frame_id] = std::move(rec);
  }
  doc["samples"] = std::move(samples);
  std::ofstream out(path);
  if (!out) throw ValidationError("dataset: cannot write '" + path + "'");
  out << doc.dump(1) << "\n";
}

void convert_h3wb(const std::string& in_path, const std::string& out_path,
                  const SkeletonTopology& topo) {
  std::ifstream in(in_path);
  if (!in) throw ValidationError("convert: cannot open '" + in_path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ValidationError("convert: malformed JSON in '" + in_path + "': " +
                          e.what());
  }

  // Upstream keypoints come either as a list of [x,y(,z)] or as a map
  // {"0": {"x":..,"y":..}, ...}.
  auto read_pose = [&](const json& kp, int cols,
                       const std::string& id) -> Eigen::MatrixXd {
    Eigen::MatrixXd m(topo.num_joints, cols);
    if (kp.is_array()) {
      if (static_cast<int>(kp.size()) != topo.num_joints)
        throw ValidationError("convert: sample '" + id + "' has " +
                              std::to_string(kp.size()) + " keypoints");
      return pose_from_json(kp, cols, id);
    }
    if (static_cast<int>(kp.size()) != topo.num_joints)
      throw ValidationError("convert: sample '" + id + "' has " +
                            std::to_string(kp.size()) + " keypoints");
    const char* axes[3] = {"x", "y", "z"};
    for (const auto& [k, v] : kp.items()) {
      int idx = std::stoi(k);
      if (idx < 0 || idx >= topo.num_joints)
        throw ValidationError("convert: sample '" + id + "' keypoint index " +
                              k + " out of range");
      for (int c = 0; c < cols; ++c) m(idx, c) = v.at(axes[c]).get<double>();
    }
    return m;
  };

  Dataset ds;
  ds.split_tag = in_path.find("train") != std::string::npos ? "train" : "test";
  for (const auto& [id, s] : doc.items()) {
    ++ds.scanned;
    PoseSample sample;
    sample.frame_id = id;
    // Subject is encoded in the image path, e.g. "S1/...".
    sample.subject_id = "unknown";
    if (s.contains("image_path")) {
      std::string p = s["image_path"].get<std::string>();
      auto slash = p.find('/');
      if (slash != std::string::npos && p[0] == 'S')
        sample.subject_id = p.substr(0, slash);
    }
    const json& kp2 = s.contains("keypoint_2d") ? s["keypoint_2d"]
                                                : s.at("joints_2d");
    sample.joints_2d = read_pose(kp2, 2, id);
    if (s.contains("keypoint_3d") || s.contains("joints_3d")) {
      const json& kp3 =
          s.contains("keypoint_3d") ? s["keypoint_3d"] : s["joints_3d"];
      Eigen::MatrixXd p3 = read_pose(kp3, 3, id);
      // Store pelvis-relative (mid-hip subtracted), matching the metric frame.
      Eigen::RowVector3d pelvis =
          0.5 * (p3.row(topo.left_hip) + p3.row(topo.right_hip));
      sample.joints_3d_gt = p3.rowwise() - pelvis;
    }
    ds.subjects.insert(sample.subject_id);
    ds.samples.push_back(std::move(sample));
    ++ds.loaded;
  }
  save_dataset(ds, out_path);
}

std::vector<int> topological_order(const SkeletonTopology& topo) {
  std::vector<int> order;
  order.reserve(topo.num_joints);
  std::vector<char> placed(topo.num_joints, 0);
  for (int d = 0; static_cast<int>(order.size()) < topo.num_joints; ++d)
    for (int i = 0; i < topo.num_joints; ++i)
      if (!placed[i] && topo.depth(i) == d) {
        order.push_back(i);
        placed[i] = 1;
      }
  return order;
}

Eigen::VectorXd synthetic_bone_lengths(const SkeletonTopology& topo) {
  Eigen::VectorXd len(topo.num_joints);
  // Coarse human-scale bone lengths (mm) per body joint, then flat values
  // for face and hand bones.
  const double body[23] = {0,   60,  60,  90,  90,  180, 180, 280,
                           280, 250, 250, 500, 500, 440, 440, 420,
                           420, 180, 160, 90,  180, 160, 90};
  for (int i = 0; i < topo.num_joints; ++i) {
    if (topo.parent[i] == i)
      len[i] = 0;
    else if (i < topo.part_ranges.body.second)
      len[i] = body[i];
    else if (i < topo.part_ranges.face.second)
      len[i] = 18.0;
    else
      len[i] = (i == topo.left_wrist_kp || i == topo.right_wrist_kp) ? 45.0
                                                                     : 32.0;
  }
  return len;
}

Dataset synthesize(int n, uint64_t seed, const CameraSpec& camera,
                   const SkeletonTopology& topo) {
  if (n < 1) throw ValidationError("synthesize: n must be >= 1");
  constexpr int kRetryCap = 100;

  Dataset ds;
  ds.split_tag = "synthetic";
  ds.image_w = camera.image_w;
  ds.image_h = camera.image_h;
  ds.camera = camera;

  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::VectorXd lengths = synthetic_bone_lengths(topo);
  const std::vector<int> order = topological_order(topo);

  // Coarse per-class direction priors: bones lean toward a nominal axis.
  auto sample_direction = [&](int joint) {
    const double z = 2.0 * unit(rng) - 1.0;
    const double phi = 2.0 * M_PI * unit(rng);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Eigen::Vector3d d(r * std::cos(phi), r * std::sin(phi), z);
    Eigen::Vector3d axis(0, 1, 0);  // image-down
    if (joint >= topo.part_ranges.face.first &&
        joint < topo.part_ranges.face.second)
      axis = Eigen::Vector3d(0, 0, -1);  // face fans toward the camera
    return (axis + 1.5 * d).normalized();
  };

  const int digits = std::max<int>(6, std::to_string(n).size());
  for (int i = 0; i < n; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < kRetryCap && !ok; ++attempt) {
      Eigen::Vector3d root(600.0 * unit(rng) - 300.0, 600.0 * unit(rng) - 300.0,
                           3500.0 + 2000.0 * unit(rng));
      Eigen::MatrixXd abs3d(topo.num_joints, 3);
      for (int j : order) {
        if (topo.parent[j] == j) {
          abs3d.row(j) = root.transpose();
        } else {
          abs3d.row(j) = abs3d.row(topo.parent[j]) +
                         lengths[j] * sample_direction(j).transpose();
        }
      }
      if ((abs3d.col(2).array() <= 1.0).any()) continue;  // behind camera

      PoseSample sample;
      Eigen::MatrixXd p2(topo.num_joints, 2);
      for (int j = 0; j < topo.num_joints; ++j)
        p2.row(j) = camera.project(abs3d.row(j).transpose()).transpose();
      sample.joints_2d = p2;
      Eigen::RowVector3d pelvis =
          0.5 * (abs3d.row(topo.left_hip) + abs3d.row(topo.right_hip));
      sample.joints_3d_gt = abs3d.rowwise() - pelvis;
      sample.subject_id = "synthetic";
      std::string id = std::to_string(i);
      sample.frame_id = std::string(digits - id.size(), '0') + id;
      ds.samples.push_back(std::move(sample));
      ds.roots_3d.emplace_back(pelvis.transpose());
      ok = true;
    }
    if (!ok)
      throw ValidationError("synthesize: retry cap hit at sample " +
                            std::to_string(i) + " (degenerate camera)");
  }
  ds.scanned = ds.loaded = n;
  ds.subjects.insert("synthetic");
  return ds;
}

std::vector<std::vector<int>> shuffled_batches(int n, int batch_size,
                                               uint64_t seed) {
  if (n < 1) throw ValidationError("batches: empty dataset");
  if (batch_size < 1) throw ValidationError("batches: batch_size must be >= 1");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < n; start += batch_size) {
    int end = std::min(n, start + batch_size);
    out.emplace_back(idx.begin() + start, idx.begin() + end);
  }
  return out;
}

Batch make_batch(const Dataset& ds, const std::vector<int>& indices,
                 const SkeletonTopology& topo) {
  Batch batch;
  batch.indices = indices;
  batch.input.resize(static_cast<Eigen::Index>(indices.size()) * topo.num_joints, 3);
  for (size_t k = 0; k < indices.size(); ++k) {
    const PoseSample& s = ds.samples.at(indices[k]);
    ModelInput mi = assemble_input(s.joints_2d, topo, ds.image_w, ds.image_h);
    batch.input.middleRows(static_cast<Eigen::Index>(k) * topo.num_joints,
                           topo.num_joints) = mi.features;
    if (s.joints_3d_gt) batch.target.push_back(*s.joints_3d_gt);
  }
  if (!batch.target.empty() && batch.target.size() != indices.size())
    throw ValidationError("make_batch: mixed presence of 3D targets");
  return batch;
}

}  // namespace wblift
