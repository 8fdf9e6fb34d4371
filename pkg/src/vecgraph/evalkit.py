"""Displacement metrics, the constant-velocity baseline and the ablation harness."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DataError, ParameterError
from .model import predict
from .vectorize import DEFAULT_DT, filter_context, normalize_scene


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    gt = np.asarray(gt, dtype=np.float64).reshape(-1, 2)
    if len(pred) != len(gt):
        raise DataError(f"prediction has {len(pred)} steps, ground truth {len(gt)}")
    if len(pred) == 0:
        raise DataError("empty trajectory")
    return pred, gt


def ade(pred, gt):
    """Mean Euclidean distance over all predicted steps."""
    pred, gt = _pair(pred, gt)
    return float(np.mean(np.linalg.norm(pred - gt, axis=1)))


def horizon_step(t, dt=DEFAULT_DT):
    k = t / dt
    step = int(round(k))
    if step < 1 or abs(k - step) > 1e-9:
        raise ParameterError(f"t={t} s is not a positive multiple of dt={dt} s")
    return step


def de_at(pred, gt, t, dt=DEFAULT_DT):
    """Displacement error ``t`` seconds into the future (step ``t / dt``)."""
    pred, gt = _pair(pred, gt)
    step = horizon_step(t, dt)
    if step > len(pred):
        raise ParameterError(f"t={t} s is beyond the {len(pred)}-step horizon")
    return float(np.linalg.norm(pred[step - 1] - gt[step - 1]))


def constant_velocity(observed, T, dt=DEFAULT_DT):
    """Repeat the last observed per-step displacement ``T`` times."""
    obs = np.asarray(observed, dtype=np.float64).reshape(-1, 2)
    if len(obs) < 2:
        raise DataError("constant velocity needs at least two observed points")
    step = obs[-1] - obs[-2]
    return obs[-1] + np.arange(1, T + 1)[:, None] * step


@dataclass
class EvalReport:
    ade: float
    de1: float
    de2: float
    de3: float
    n_scenes: int

    def row(self):
        return asdict(self)


def _de_or_nan(pred, gt, t):
    try:
        return de_at(pred, gt, t)
    except ParameterError:
        return float("nan")


def report(preds, gts):
    if not preds:
        return EvalReport(float("nan"), float("nan"), float("nan"), float("nan"), 0)
    return EvalReport(
        ade=float(np.mean([ade(p, g) for p, g in zip(preds, gts)])),
        de1=float(np.mean([_de_or_nan(p, g, 1.0) for p, g in zip(preds, gts)])),
        de2=float(np.mean([_de_or_nan(p, g, 2.0) for p, g in zip(preds, gts)])),
        de3=float(np.mean([_de_or_nan(p, g, 3.0) for p, g in zip(preds, gts)])),
        n_scenes=len(preds),
    )


def predict_scenes(params, cfg, scenes, batch_size=64):
    """Raw-frame predictions for raw or normalized scenes."""
    normed = [s if s.frame == "normalized" else normalize_scene(s) for s in scenes]
    out = []
    for i in range(0, len(normed), batch_size):
        preds, _ = predict(params, cfg, normed[i:i + batch_size])
        out.extend(preds)
    return out


def _raw_gt(s):
    from .vectorize import from_frame

    return from_frame(s.future_gt, s.origin, s.heading) if s.frame == "normalized" else s.future_gt


def evaluate_model(params, cfg, scenes):
    preds = predict_scenes(params, cfg, scenes)
    return report([p.absolute for p in preds], [_raw_gt(s) for s in scenes])


def evaluate_constant_velocity(scenes):
    preds, gts = [], []
    for s in scenes:
        obs = s.target.points[: s.observed_steps]
        preds.append(constant_velocity(obs, len(s.future_gt)))
        gts.append(s.future_gt)
    return report(preds, gts)


# ---------------------------------------------------------------- ablation


CONTEXTS = ("none", "map", "map+agents")


@dataclass
class Arm:
    context: str = "map+agents"
    node_completion: bool = True

    def __post_init__(self):
        if self.context not in CONTEXTS:
            raise ParameterError(f"unknown context {self.context!r}")

    @property
    def label(self):
        return f"{self.context} / {'yes' if self.node_completion else 'no'}"


def ablate(train_scenes, val_scenes, arms, model_cfg, train_cfg):
    """Train one model per arm on the same data and seed; returns [(arm, EvalReport, TrainResult)]."""
    from .training import train

    if not arms:
        raise ParameterError("no ablation arms given")
    rows = []
    for arm in arms:
        cfg = model_cfg if arm.node_completion else replace(model_cfg, alpha=0.0, mask_prob=0.0)
        tr = [filter_context(s, arm.context) for s in train_scenes]
        va = [filter_context(s, arm.context) for s in val_scenes]
        res = train(tr, cfg, train_cfg, val=va)
        rows.append((arm, evaluate_model(res.params, cfg, va), res))
    return rows


TABLE_FIELDS = ["context", "node_completion", "de1", "de2", "de3", "ade", "n_scenes"]


def ablation_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_FIELDS)
    for arm, rep, *_ in rows:
        w.writerow([arm.context, "yes" if arm.node_completion else "no",
                    f"{rep.de1:.4f}", f"{rep.de2:.4f}", f"{rep.de3:.4f}", f"{rep.ade:.4f}", rep.n_scenes])
    return buf.getvalue()


def format_table(rows):
    lines = [f"{'Context':<12} {'Node Compl.':<11} {'DE@1s':>7} {'DE@2s':>7} {'DE@3s':>7} {'ADE':>7}",
             "-" * 56]
    for arm, rep, *_ in rows:
        cells = [rep.de1, rep.de2, rep.de3, rep.ade]
        lines.append(f"{arm.context:<12} {'yes' if arm.node_completion else 'no':<11} "
                     + " ".join(f"{c:7.3f}" if math.isfinite(c) else f"{'-':>7}" for c in cells))
    return "\n".join(lines)
