#include "wblift/skeleton.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef WBLIFT_ASSET_DIR
#define WBLIFT_ASSET_DIR "assets"
#endif

namespace wblift {

using nlohmann::json;

SkeletonTopology SkeletonTopology::from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("topology: malformed JSON: ") + e.what());
  }

  SkeletonTopology t;
  try {
    t.version = doc.at("version").get<std::string>();
    t.num_joints = doc.at("num_joints").get<int>();
    t.parent = doc.at("parent").get<std::vector<int>>();
    const auto& pr = doc.at("part_ranges");
    auto range = [&](const char* key) {
      auto v = pr.at(key).get<std::vector<int>>();
      if (v.size() != 2) throw ValidationError(std::string("topology: part range '") + key + "' must have 2 entries");
      return std::make_pair(v[0], v[1]);
    };
    t.part_ranges.body = range("body");
    t.part_ranges.face = range("face");
    t.part_ranges.hands = range("hands");
    for (const auto& p : doc.at("flip_pairs")) {
      auto v = p.get<std::vector<int>>();
      if (v.size() != 2) throw ValidationError("topology: flip pair must have 2 entries");
      t.flip_pairs.emplace_back(v[0], v[1]);
    }
    const auto& tri = doc.at("limb_triangles");
    const char* names[4] = {"l_arm", "r_arm", "l_leg", "r_leg"};
    for (int k = 0; k < 4; ++k) {
      auto v = tri.at(names[k]).get<std::vector<int>>();
      if (v.size() != 3) throw ValidationError(std::string("topology: limb triangle '") + names[k] + "' must have 3 joints");
      t.limb_triangles[k] = {v[0], v[1], v[2]};
    }
    const auto& nj = doc.at("named_joints");
    t.left_hip = nj.at("left_hip").get<int>();
    t.right_hip = nj.at("right_hip").get<int>();
    t.nose = nj.at("nose").get<int>();
    t.left_wrist_kp = nj.at("left_wrist_kp").get<int>();
    t.right_wrist_kp = nj.at("right_wrist_kp").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("topology: missing or mistyped field: ") + e.what());
  }

  t.validate();
  return t;
}

SkeletonTopology SkeletonTopology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("topology: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

const SkeletonTopology& SkeletonTopology::shipped() {
  static const SkeletonTopology topo =
      load(std::string(WBLIFT_ASSET_DIR) + "/topology_coco_wholebody.json");
  return topo;
}

void SkeletonTopology::validate() const {
  const int n = num_joints;
  if (n != kNumJoints)
    throw ValidationError("topology: num_joints is " + std::to_string(n) +
                          ", expected " + std::to_string(kNumJoints));
  if (static_cast<int>(parent.size()) != n)
    throw ValidationError("topology: parent table has " +
                          std::to_string(parent.size()) + " entries");

  for (int i = 0; i < n; ++i) {
    if (parent[i] < 0 || parent[i] >= n)
      throw ValidationError("topology: parent[" + std::to_string(i) +
                            "] out of range");
  }

  // Acyclic, single-rooted: every joint must reach a root within n steps.
  int root = -1;
  for (int i = 0; i < n; ++i) {
    int j = i, steps = 0;
    while (parent[j] != j) {
      j = parent[j];
      if (++steps >= n)
        throw ValidationError("topology: cycle in parent table reachable from joint " +
                              std::to_string(i));
    }
    if (root == -1) root = j;
    if (j != root)
      throw ValidationError("topology: multiple roots (" + std::to_string(root) +
                            " and " + std::to_string(j) + ")");
  }

  auto check_range = [&](const char* name, std::pair<int, int> r, int size) {
    if (r.second - r.first != size)
      throw ValidationError(std::string("topology: part range '") + name +
                            "' has size " + std::to_string(r.second - r.first) +
                            ", expected " + std::to_string(size));
  };
  check_range("body", part_ranges.body, 23);
  check_range("face", part_ranges.face, 68);
  check_range("hands", part_ranges.hands, 42);
  if (part_ranges.body.first != 0 ||
      part_ranges.face.first != part_ranges.body.second ||
      part_ranges.hands.first != part_ranges.face.second ||
      part_ranges.hands.second != n)
    throw ValidationError("topology: part ranges must tile [0," +
                          std::to_string(n) + ") in body/face/hands order");

  // Flip pairs form an involution: no index in two pairs, no self pairs.
  std::vector<int> seen(n, 0);
  for (const auto& [a, b] : flip_pairs) {
    if (a < 0 || a >= n || b < 0 || b >= n || a == b)
      throw ValidationError("topology: bad flip pair (" + std::to_string(a) +
                            "," + std::to_string(b) + ")");
    if (seen[a]++ || seen[b]++)
      throw ValidationError("topology: joint appears in two flip pairs: " +
                            std::to_string(seen[a] > 1 ? a : b));
  }

  for (int k = 0; k < 4; ++k) {
    const auto& tri = limb_triangles[k];
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw ValidationError("topology: limb triangle " + std::to_string(k) +
                            " has repeated joints");
    for (int j : tri)
      if (j < part_ranges.body.first || j >= part_ranges.body.second)
        throw ValidationError("topology: limb triangle joint " + std::to_string(j) +
                              " outside body range");
  }

  for (int idx : {left_hip, right_hip, nose, left_wrist_kp, right_wrist_kp})
    if (idx < 0 || idx >= n)
      throw ValidationError("topology: named joint index " + std::to_string(idx) +
                            " out of range");

  // Hand roots hang off the body wrists.
  auto body_wrist = [&](int hand_root) { return parent[hand_root]; };
  if (body_wrist(left_wrist_kp) < 0 || body_wrist(left_wrist_kp) >= part_ranges.body.second)
    throw ValidationError("topology: left hand root's parent must be a body joint (the wrist)");
  if (body_wrist(right_wrist_kp) < 0 || body_wrist(right_wrist_kp) >= part_ranges.body.second)
    throw ValidationError("topology: right hand root's parent must be a body joint (the wrist)");
}

int SkeletonTopology::depth(int joint) const {
  int d = 0, j = joint;
  while (parent[j] != j) {
    j = parent[j];
    ++d;
  }
  return d;
}

AdjacencyMask build_adjacency(const SkeletonTopology& topo) {
  const int n = topo.num_joints;
  AdjacencyMask mask = AdjacencyMask::Constant(n, n, false);
  for (int i = 0; i < n; ++i) {
    mask(i, i) = true;
    int p = topo.parent[i];
    if (p != i) {
      mask(i, p) = true;
      mask(p, i) = true;
    }
  }
  return mask;
}

std::vector<int> flip_permutation(const SkeletonTopology& topo) {
  std::vector<int> perm(topo.num_joints);
  for (int i = 0; i < topo.num_joints; ++i) perm[i] = i;
  for (const auto& [a, b] : topo.flip_pairs) {
    perm[a] = b;
    perm[b] = a;
  }
  return perm;
}

}  // namespace wblift
