"""
From a driving scene to vector nodes
====================================

A scene is a list of polylines: lane lines, crosswalks, stop signs, speed
bumps and agent tracks. Each consecutive pair of points becomes one vector
node with its start, end, kind, time and owning polyline.
"""

import numpy as np

from vecgraph.scenegen import ScenarioSpec, generate
from vecgraph.vectorize import build_vectors, normalize_scene, polyline_identifier, scene_arrays

scene = generate(ScenarioSpec(kind="left_turn", seed=4))
print(f"{scene.kind} scene with {len(scene.polylines)} polylines, target id {scene.target_id}")
for p in scene.polylines[:3] + [scene.target]:
    print(f"  polyline {p.id:2d} {p.kind:<17} {len(p.points):3d} points")

# the target's observed track as vectors
nodes = build_vectors(scene.target)
print("first target vector:", nodes[0].start.round(2), "->", nodes[0].end.round(2))
print("identifier (min of starts):", polyline_identifier(nodes).round(2))

# predictions are made in a frame centred on the target and aligned with its heading
ns = normalize_scene(scene)
print("last observed point after normalization:", ns.last_observed.round(12))
print("heading of the raw frame (rad):", round(ns.heading, 3))

feats, groups, ids, target_row = scene_arrays(ns)
print("feature matrix", feats.shape, "over", groups.max() + 1, "polylines; target row", target_row)
print("columns: start x,y | end x,y | one-hot kind (5) | timestamp | 2 extra attributes")
print(np.round(feats[groups == target_row][:3], 3))
