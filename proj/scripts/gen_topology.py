#!/usr/bin/env python3
"""Generates assets/topology_coco_wholebody.json.

133-joint COCO-WholeBody layout rooted at the nose. The parent tree is
mirror-symmetric: parent[flip(i)] == flip(parent[i]) for every joint, so
horizontal flipping commutes with parent-relative quantities (distances,
bone vectors).
"""
import json
import os

N = 133
parent = [None] * N

# Body (0..16) + feet (17..22). Root = nose (0), parent of root is itself.
parent[0] = 0            # nose (root)
parent[1] = 0            # left eye
parent[2] = 0            # right eye
parent[3] = 1            # left ear <- left eye
parent[4] = 2            # right ear <- right eye
parent[5] = 0            # left shoulder
parent[6] = 0            # right shoulder
parent[7] = 5            # left elbow
parent[8] = 6            # right elbow
parent[9] = 7            # left wrist
parent[10] = 8           # right wrist
parent[11] = 5           # left hip <- left shoulder
parent[12] = 6           # right hip <- right shoulder
parent[13] = 11          # left knee
parent[14] = 12          # right knee
parent[15] = 13          # left ankle
parent[16] = 14          # right ankle
parent[17] = 15          # left big toe
parent[18] = 15          # left small toe
parent[19] = 15          # left heel
parent[20] = 16          # right big toe
parent[21] = 16          # right small toe
parent[22] = 16          # right heel

# Face (23..90), 68 points in the iBUG ordering, local indices 0..67.
F = 23
def fp(local, par_local):
    parent[F + local] = F + par_local
def fg(local, par_global):
    parent[F + local] = par_global

# Jaw 0..16, chin (8) hangs off the nose; both sides chain outward.
fg(8, 0)
for k in range(7, -1, -1):
    fp(k, k + 1)
for k in range(9, 17):
    fp(k, k - 1)
# Nose bridge 27..30 (midline), then nostril row 31..35 off the tip row mid 33.
fg(27, 0)
fp(28, 27)
fp(29, 28)
fp(30, 29)
fp(33, 30)
fp(32, 33)
fp(31, 32)
fp(34, 33)
fp(35, 34)
# Brows: 17..21 left outward-in, 22..26 right; inner ends hang off bridge top.
fp(21, 27)
fp(22, 27)
for k in range(20, 16, -1):
    fp(k, k + 1)
for k in range(23, 27):
    fp(k, k - 1)
# Eyes: left 36..41, right 42..47, chained around from the bridge top.
fp(36, 27)
fp(37, 36)
fp(38, 37)
fp(39, 38)
fp(40, 39)
fp(41, 40)
fp(45, 27)
fp(44, 45)
fp(43, 44)
fp(42, 43)
fp(47, 42)
fp(46, 47)
# Mouth outer 48..59: top mid 51 off nostril mid; bottom mid 57 off 51.
fp(51, 33)
fp(50, 51)
fp(49, 50)
fp(48, 49)
fp(52, 51)
fp(53, 52)
fp(54, 53)
fp(57, 51)
fp(56, 57)
fp(55, 56)
fp(58, 57)
fp(59, 58)
# Mouth inner 60..67: top mid 62 off 51, bottom mid 66 off 62.
fp(62, 51)
fp(61, 62)
fp(60, 61)
fp(63, 62)
fp(64, 63)
fp(66, 62)
fp(65, 66)
fp(67, 66)

# Hands: 21 joints each, wrist + 4 joints per finger. Left block starts at 91
# (keypoint 92, 1-indexed), right at 112 (keypoint 113).
HAND_PARENT_LOCAL = [0, 0, 1, 2, 3, 0, 5, 6, 7, 0, 9, 10, 11, 0, 13, 14, 15, 0, 17, 18, 19]
for base, wrist in ((91, 9), (112, 10)):
    parent[base] = wrist
    for k in range(1, 21):
        parent[base + k] = base + HAND_PARENT_LOCAL[k]

assert all(p is not None for p in parent)

# Flip pairs (left index first).
body_pairs = [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14),
              (15, 16), (17, 20), (18, 21), (19, 22)]
face_pairs_local = (
    [(k, 16 - k) for k in range(8)] +                       # jaw
    [(17, 26), (18, 25), (19, 24), (20, 23), (21, 22)] +    # brows
    [(31, 35), (32, 34)] +                                  # nostrils
    [(36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46)] +  # eyes
    [(48, 54), (49, 53), (50, 52), (55, 59), (56, 58)] +    # outer mouth
    [(60, 64), (61, 63), (65, 67)]                          # inner mouth
)
face_pairs = [(F + a, F + b) for a, b in face_pairs_local]
hand_pairs = [(91 + k, 112 + k) for k in range(21)]
flip_pairs = body_pairs + face_pairs + hand_pairs

# Sanity: parent tree commutes with the flip permutation.
flip = list(range(N))
for a, b in flip_pairs:
    flip[a], flip[b] = b, a
for i in range(N):
    assert parent[flip[i]] == flip[parent[i]], f"asymmetric at joint {i}"
for i in range(N):
    j, steps = i, 0
    while parent[j] != j:
        j = parent[j]
        steps += 1
        assert steps < N, f"cycle at joint {i}"

topo = {
    "version": "coco-wholebody-133/v1",
    "num_joints": N,
    "parent": parent,
    "part_ranges": {"body": [0, 23], "face": [23, 91], "hands": [91, 133]},
    "flip_pairs": [list(p) for p in flip_pairs],
    "limb_triangles": {
        "l_arm": [5, 7, 9],
        "r_arm": [6, 8, 10],
        "l_leg": [11, 13, 15],
        "r_leg": [12, 14, 16],
    },
    "named_joints": {
        "left_hip": 11,
        "right_hip": 12,
        "nose": 0,
        "left_wrist_kp": 91,
        "right_wrist_kp": 112,
    },
}

out = os.path.join(os.path.dirname(__file__), "..", "assets",
                   "topology_coco_wholebody.json")
os.makedirs(os.path.dirname(out), exist_ok=True)
with open(out, "w") as f:
    json.dump(topo, f, indent=1)
    f.write("\n")
print(f"wrote {out}")
