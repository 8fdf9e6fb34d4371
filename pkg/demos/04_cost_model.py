"""
Counting parameters and FLOPs
=============================

The vector encoder's cost grows with the number of vectors and targets in a
scene, while a rasterised ConvNet's cost grows with image area.
"""

from vecgraph.costmodel import (SceneStats, convnet_flops, count_params, flops_table, format_flops_table,
                                vectornet_flops)
from vecgraph.model import ModelConfig

cfg = ModelConfig()
print("parameters at width 64, three subgraph layers:", count_params(cfg).params)
print()
print(format_flops_table(flops_table(cfg)))

# doubling the image side quadruples the ConvNet's work
for r in (100, 200, 400):
    print(f"ConvNet at {r}px: {convnet_flops(r, 3).flops / 1e9:.2f} GFLOPs")

for n in (1, 2, 4):
    print(f"vector graph, {n} target(s): {vectornet_flops(SceneStats(n_targets=n), cfg).flops / 1e9:.3f} GFLOPs")
