"""Adam, the step-decay learning-rate schedule and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from decimal import Decimal

import numpy as np

from . import diffcore as dc
from .errors import DataError, DimensionError, TrainingDiverged
from .model import ModelConfig, forward, init_params, loss, make_batch
from .vectorize import normalize_scene

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    initial_lr: float = 0.001
    decay_factor: float = 0.3
    decay_every: int = 5
    epochs: int = 25
    batch_size: int = 32
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    val_fraction: float = 0.2

    def __post_init__(self):
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must lie in (0, 1]")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1 or self.decay_every < 1:
            raise ValueError("batch_size and decay_every must be >= 1")
        self.betas = tuple(self.betas)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def lr_at(epoch, cfg):
    """Learning rate for a 0-based epoch: decays by ``decay_factor`` every ``decay_every`` epochs."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    # decimal arithmetic so 0.001 * 0.3**2 comes out as 9e-05 rather than 8.999999999999999e-05
    k = epoch // cfg.decay_every
    return float(Decimal(repr(cfg.initial_lr)) * Decimal(repr(cfg.decay_factor)) ** k)


# ---------------------------------------------------------------- Adam


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8):
    """One bias-corrected Adam update, in place on ``params`` (name -> ndarray)."""
    b1, b2 = betas
    state.step += 1
    bc1 = 1.0 - b1 ** state.step
    bc2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        if g.shape != p.shape:
            raise DimensionError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


# ---------------------------------------------------------------- loop


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_ade: float
    val_de1: float
    val_de2: float
    val_de3: float
    val_node_huber: float

    def row(self):
        return asdict(self)


HISTORY_FIELDS = ["epoch", "lr", "train_loss", "val_ade", "val_de1", "val_de2", "val_de3", "val_node_huber"]


def split_dataset(scenes, val_fraction):
    """Deterministic split: the last ``val_fraction`` of the list is held out."""
    n_val = int(round(len(scenes) * val_fraction))
    if len(scenes) - n_val < 1:
        raise DataError("training split is empty")
    return scenes[: len(scenes) - n_val], scenes[len(scenes) - n_val:]


def _normalized(scenes):
    return [s if s.frame == "normalized" else normalize_scene(s) for s in scenes]


def _param_norms(params):
    return {k: float(np.linalg.norm(t.data)) for k, t in params.items()}


def batch_loss(params, cfg, scenes, mode, rng=None):
    batch = make_batch(scenes, cfg.future_steps)
    res = forward(params, cfg, batch, mode, rng)
    return loss(res, batch.gt_offsets, cfg), res


def masked_node_loss(params, cfg, scenes, seed, batch_size=64):
    """Huber loss of the node decoder on held-out scenes under a fixed mask draw."""
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    for i in range(0, len(scenes), batch_size):
        res = forward(params, cfg, make_batch(scenes[i:i + batch_size], cfg.future_steps), "train_with_mask", rng)
        if res.node_preds is None:
            continue
        n = res.node_preds.size
        total += float(dc.huber(res.node_preds.data, res.node_targets.data, cfg.huber_delta).data) * n
        count += n
    return total / count if count else float("nan")


@dataclass
class TrainResult:
    params: dict
    history: list
    adam: AdamState
    model_cfg: ModelConfig
    train_cfg: TrainConfig


def train(dataset, model_cfg, train_cfg, val=None, resume=None, on_epoch_end=None, evaluate_fn=None):
    """Fit the network with Adam on the multi-task objective.

    ``dataset`` holds raw or normalized scenes; without ``val`` the tail
    ``val_fraction`` of it is held out. ``resume`` is a checkpoint dict
    (see :mod:`vecgraph.io`) and continues from the epoch after it.
    Fully deterministic for a fixed ``train_cfg.seed``.
    """
    from .evalkit import evaluate_model

    evaluate_fn = evaluate_fn or evaluate_model
    if not dataset:
        raise DataError("empty dataset")
    if val is None:
        train_set, val = split_dataset(list(dataset), train_cfg.val_fraction)
    else:
        train_set = list(dataset)
    if not val:
        raise DataError("empty validation split")
    train_n = _normalized(train_set)
    val_n = _normalized(val)

    if resume is not None:
        params = {k: dc.Tensor(v, requires_grad=True) for k, v in resume["params"].items()}
        adam = resume.get("adam") or AdamState()
        history = list(resume.get("history", []))
        start = resume["epoch"] + 1
    else:
        params = init_params(model_cfg, train_cfg.seed)
        adam = AdamState()
        history = []
        start = 0

    values = {k: t.data for k, t in params.items()}
    bs = train_cfg.batch_size
    for epoch in range(start, train_cfg.epochs):
        lr = lr_at(epoch, train_cfg)
        rng = np.random.default_rng([train_cfg.seed, epoch])
        order = rng.permutation(len(train_n))
        losses = []
        for b, i in enumerate(range(0, len(order), bs)):
            chunk = [train_n[j] for j in order[i:i + bs]]
            L, _ = batch_loss(params, model_cfg, chunk, "train_with_mask", rng)
            val_l = float(L.data)
            if not math.isfinite(val_l):
                norms = _param_norms(params)
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {b}; largest parameter norm "
                    f"{max(norms.values()):.3g}", epoch, b, norms)
            for t in params.values():
                t.zero_grad()
            dc.backward(L)
            adam_step(values, {k: t.grad for k, t in params.items()}, adam, lr, train_cfg.betas, train_cfg.eps)
            losses.append(val_l)
        rep = evaluate_fn(params, model_cfg, val_n)
        node = masked_node_loss(params, model_cfg, val_n, seed=[train_cfg.seed, 10**6]) if model_cfg.mask_prob > 0 else float("nan")
        rec = EpochRecord(epoch, lr, float(np.mean(losses)), rep.ade, rep.de1, rep.de2, rep.de3, node)
        history.append(rec)
        log.info("epoch %d lr %.2e loss %.4f val ADE %.3f node %.4f", epoch, lr, rec.train_loss, rec.val_ade, node)
        if on_epoch_end is not None:
            on_epoch_end(epoch, params, adam, history)
    return TrainResult(params, history, adam, model_cfg, train_cfg)
