"""
What does context buy?
======================

Trains the same network three times: on the target's own track, with the
map added, and with the map plus other agents. Turn-heavy scenes make the
map matter. Takes under a minute on one core.
"""

from vecgraph.evalkit import Arm, ablate, format_table
from vecgraph.model import ModelConfig
from vecgraph.scenegen import generate_dataset
from vecgraph.training import TrainConfig, split_dataset

mix = {"straight": 0.2, "left_turn": 0.3, "right_turn": 0.3, "lane_change": 0.2}
tr, va = split_dataset(generate_dataset(800, mix=mix, seed=1), 0.2)
arms = [Arm(c, node_completion=False) for c in ("none", "map", "map+agents")]
rows = ablate(tr, va, arms, ModelConfig(width=16), TrainConfig(epochs=10, initial_lr=0.005, batch_size=16))
print(format_table(rows))
