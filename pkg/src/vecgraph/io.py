"""Scene files, checkpoints and training history on disk.

Scenes are JSON Lines, one scene per line::

    {"polylines": [{"id": 0, "kind": "lane_boundary", "points": [[x, y], ...],
                    "timestamps": [...], "attributes": [...]}, ...],
     "target_id": 3, "observed_steps": 10, "future_gt": [[x, y], ...]}

Checkpoints are a single JSON document: a header (format, config, seed,
epoch, shapes) plus every parameter as base64 of its little-endian float64
bytes, so a save/load round trip is bitwise exact.
"""

from __future__ import annotations

import base64
import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import ModelConfig
from .training import HISTORY_FIELDS, AdamState, EpochRecord, TrainConfig
from .vectorize import Polyline, Scene

CHECKPOINT_FORMAT = "vecgraph-checkpoint/1"


# ---------------------------------------------------------------- scenes


def scene_to_dict(s):
    polys = []
    for p in s.polylines:
        d = {"id": int(p.id), "kind": p.kind, "points": p.points.tolist()}
        if p.timestamps is not None:
            d["timestamps"] = p.timestamps.tolist()
        if p.extras:
            d["attributes"] = [float(x) for x in p.extras]
        polys.append(d)
    out = {"polylines": polys, "target_id": int(s.target_id), "observed_steps": int(s.observed_steps),
           "future_gt": None if s.future_gt is None else s.future_gt.tolist()}
    if s.kind is not None:
        out["kind"] = s.kind
    return out


def scene_from_dict(d):
    try:
        polys = [Polyline(int(p["id"]), p["kind"], np.asarray(p["points"], dtype=np.float64),
                          None if p.get("timestamps") is None else np.asarray(p["timestamps"], dtype=np.float64),
                          tuple(p.get("attributes") or ()))
                 for p in d["polylines"]]
        fut = d.get("future_gt")
        return Scene(polys, int(d["target_id"]), int(d["observed_steps"]),
                     None if fut is None else np.asarray(fut, dtype=np.float64), kind=d.get("kind"))
    except KeyError as e:
        raise DataError(f"scene record is missing field {e}") from None


def write_scenes(path, scenes):
    with open(path, "w") as fh:
        for s in scenes:
            fh.write(json.dumps(scene_to_dict(s), separators=(",", ":")))
            fh.write("\n")


def read_scenes(path):
    scenes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                scenes.append(scene_from_dict(json.loads(line)))
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: {e}") from None
    return scenes


# ---------------------------------------------------------------- checkpoints


def _enc(a):
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d):
    return np.frombuffer(base64.b64decode(d["data"]), dtype="<f8").reshape(d["shape"]).astype(np.float64)


def save_checkpoint(path, params, model_cfg, epoch, seed, train_cfg=None, adam=None, history=None):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "model_config": model_cfg.to_dict(),
        "train_config": None if train_cfg is None else train_cfg.to_dict(),
        "seed": seed,
        "epoch": epoch,
        "shapes": {k: list(np.shape(_values(v))) for k, v in params.items()},
        "params": {k: _enc(_values(v)) for k, v in params.items()},
    }
    if adam is not None:
        doc["adam"] = {"step": adam.step,
                       "m": {k: _enc(v) for k, v in adam.m.items()},
                       "v": {k: _enc(v) for k, v in adam.v.items()}}
    if history is not None:
        doc["history"] = [asdict(h) for h in history]
    Path(path).write_text(json.dumps(doc))


def _values(v):
    return v.data if hasattr(v, "data") and not isinstance(v, np.ndarray) else v


def load_checkpoint(path):
    """Returns a dict with ``params`` (name -> ndarray), configs, epoch, seed, adam, history."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    out = {
        "params": {k: _dec(v) for k, v in doc["params"].items()},
        "model_config": ModelConfig.from_dict(doc["model_config"]),
        "train_config": None if doc.get("train_config") is None else TrainConfig.from_dict(doc["train_config"]),
        "seed": doc["seed"],
        "epoch": doc["epoch"],
        "history": [EpochRecord(**h) for h in doc.get("history", [])],
        "adam": None,
    }
    if "adam" in doc:
        a = doc["adam"]
        out["adam"] = AdamState({k: _dec(v) for k, v in a["m"].items()},
                                {k: _dec(v) for k, v in a["v"].items()}, a["step"])
    return out


# ---------------------------------------------------------------- history


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, lineterminator="\n")
        w.writeheader()
        for rec in history:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.row().items()})


def read_history(path):
    with open(path, newline="") as fh:
        return [EpochRecord(int(r["epoch"]), *(float(r[k]) for k in HISTORY_FIELDS[1:])) for r in csv.DictReader(fh)]
