"""
A small model against the constant-velocity baseline
====================================================

Trains a narrow network for a few epochs on synthetic scenes and compares
its held-out displacement errors with straight-line extrapolation.
Takes about a minute on one core.
"""

from collections import defaultdict

from vecgraph.evalkit import evaluate_constant_velocity, evaluate_model
from vecgraph.model import ModelConfig
from vecgraph.scenegen import generate_dataset
from vecgraph.training import TrainConfig, split_dataset, train
from vecgraph.vectorize import normalize_scene

scenes = generate_dataset(1500, seed=0)
tr, va = split_dataset(scenes, 0.2)

cfg = ModelConfig(width=16)
res = train(tr, cfg, TrainConfig(epochs=15, initial_lr=0.005, batch_size=16), val=va)
for h in res.history:
    print(f"epoch {h.epoch}  lr {h.lr:.1e}  train loss {h.train_loss:7.3f}  val ADE {h.val_ade:.3f}"
          f"  masked-node Huber {h.val_node_huber:.4f}")

by_kind = defaultdict(list)
for s in va:
    by_kind[s.kind].append(s)
print(f"\n{'kind':<12} {'model ADE':>9} {'CV ADE':>7}")
for kind, group in sorted(by_kind.items()):
    model = evaluate_model(res.params, cfg, [normalize_scene(s) for s in group]).ade
    print(f"{kind:<12} {model:9.3f} {evaluate_constant_velocity(group).ade:7.3f}")
