"""Hierarchical polyline graph network.

Vectors of each polyline pass through shared encoder layers with max-pool
aggregation, are pooled into one feature per polyline, and the polylines
then exchange information through self-attention. The target's row is
decoded into per-step offsets; in training mode a random subset of polyline
features is masked out and reconstructed by an auxiliary decoder.

Several scenes can be run as one batch: their vectors are stacked with
disjoint polyline indices and attention is restricted to polylines of the
same scene, which gives results identical (up to rounding) to running each
scene separately.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import diffcore as dc
from .errors import DimensionError, StateError
from .vectorize import NODE_WIDTH, from_frame, scene_arrays


@dataclass
class ModelConfig:
    subgraph_depth: int = 3
    global_depth: int = 1
    width: int = 64
    # projection width of the attention layers; None means 2 * width, the
    # width of the polyline features entering the global graph
    global_width: int | None = None
    future_steps: int = 30
    alpha: float = 1.0
    mask_prob: float = 0.15
    huber_delta: float = 1.0
    attention_scaled: bool = False
    input_width: int = NODE_WIDTH
    ln_eps: float = 1e-5
    # metres per network input unit, applied to vector coordinates and identifiers
    coord_scale: float = 10.0

    def __post_init__(self):
        if self.subgraph_depth < 1 or self.global_depth < 1:
            raise ValueError("graph depths must be >= 1")
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not 0 <= self.mask_prob < 1:
            raise ValueError("mask_prob must lie in [0, 1)")
        if self.coord_scale <= 0:
            raise ValueError("coord_scale must be positive")
        if self.global_width is None:
            self.global_width = 2 * self.width

    @property
    def feature_width(self):
        return 2 * self.width

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ---------------------------------------------------------------- parameters


def param_shapes(cfg):
    """Ordered name -> shape map of every learnable tensor."""
    w, gw = cfg.width, cfg.global_width
    shapes = {}
    d_in = cfg.input_width
    for l in range(cfg.subgraph_depth):
        shapes[f"subgraph.{l}.weight"] = (d_in, w)
        shapes[f"subgraph.{l}.bias"] = (w,)
        shapes[f"subgraph.{l}.ln_gamma"] = (w,)
        shapes[f"subgraph.{l}.ln_beta"] = (w,)
        d_in = 2 * w
    d_in = 2 * w + 2  # polyline feature ++ identifier embedding
    for l in range(cfg.global_depth):
        for proj in ("query", "key", "value"):
            shapes[f"global.{l}.{proj}"] = (d_in, gw)
        d_in = gw
    for head, out in (("traj", 2 * cfg.future_steps), ("node", 2 * w)):
        shapes[f"{head}.0.weight"] = (gw, w)
        shapes[f"{head}.0.bias"] = (w,)
        shapes[f"{head}.1.weight"] = (w, out)
        shapes[f"{head}.1.bias"] = (out,)
    return shapes


def is_decoder(name):
    return name.startswith(("traj.", "node."))


def init_params(cfg, seed=0):
    """Glorot-uniform weights, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith("ln_gamma"):
            data = np.ones(shape)
        elif len(shape) == 1:
            data = np.zeros(shape)
        else:
            lim = math.sqrt(6.0 / (shape[0] + shape[1]))
            data = rng.uniform(-lim, lim, size=shape)
        params[name] = dc.Tensor(data, requires_grad=True)
    return params


def count_allocated(params, include_decoders=False):
    return sum(t.size for n, t in params.items() if include_decoders or not is_decoder(n))


# ---------------------------------------------------------------- batching


@dataclass
class Batch:
    feats: np.ndarray          # (N, input_width)
    groups: np.ndarray         # (N,) polyline row of each vector
    ids: np.ndarray            # (P, 2) identifier embedding per polyline
    poly_scene: np.ndarray     # (P,) scene index per polyline
    target_rows: np.ndarray    # (B,) polyline row of each scene's target
    attn_mask: np.ndarray      # (P, P) same-scene admissibility
    gt_offsets: np.ndarray | None  # (B * T, 2)
    scenes: list = field(repr=False, default_factory=list)

    @property
    def n_polylines(self):
        return len(self.ids)

    @property
    def n_scenes(self):
        return len(self.target_rows)


def gt_offsets(scene):
    """Per-step ground-truth displacements from the last observed position."""
    fut = scene.future_gt
    prev = np.vstack([scene.last_observed[None], fut[:-1]])
    return fut - prev


def make_batch(scenes, future_steps=None):
    feats, groups, ids, poly_scene, targets, offsets = [], [], [], [], [], []
    row = 0
    for b, s in enumerate(scenes):
        if s.frame != "normalized":
            raise StateError("the encoder consumes normalized scenes only")
        f, g, i, t = scene_arrays(s)
        feats.append(f)
        groups.append(g + row)
        ids.append(i)
        poly_scene.append(np.full(len(i), b))
        targets.append(t + row)
        row += len(i)
        if s.future_gt is not None:
            if future_steps is not None and len(s.future_gt) != future_steps:
                raise DimensionError(f"scene has {len(s.future_gt)} future steps, model predicts {future_steps}")
            offsets.append(gt_offsets(s))
    poly_scene = np.concatenate(poly_scene)
    return Batch(
        feats=np.vstack(feats),
        groups=np.concatenate(groups),
        ids=np.vstack(ids),
        poly_scene=poly_scene,
        target_rows=np.asarray(targets),
        attn_mask=poly_scene[:, None] == poly_scene[None, :],
        gt_offsets=np.vstack(offsets) if len(offsets) == len(scenes) and offsets else None,
        scenes=list(scenes),
    )


# ---------------------------------------------------------------- layers


def subgraph_layer(feats, groups, weight, bias, gamma=None, beta=None, n_groups=None, eps=1e-5):
    """One polyline propagation step: encode, max-pool per polyline, concatenate.

    With ``gamma``/``beta`` left as None the layer norm is bypassed.
    """
    h = dc.add(dc.matmul(feats, weight), bias)
    if gamma is not None:
        h = dc.layer_norm(h, gamma, beta, eps)
    enc = dc.relu(h)
    agg = dc.max_pool_groups(enc, groups, n_groups)
    return dc.concat(enc, dc.gather_rows(agg, groups))


def polyline_features(feats, groups, n_groups=None, eps=1e-12):
    """Max-pool vector features into unit-norm polyline features."""
    return dc.l2_normalize_rows(dc.max_pool_groups(feats, groups, n_groups), eps)


def global_attention(p, w_q, w_k, w_v, mask=None, scaled=False):
    """Single-head self-attention over polyline rows; returns (output, weights)."""
    q = dc.matmul(p, w_q)
    k = dc.matmul(p, w_k)
    v = dc.matmul(p, w_v)
    scores = dc.matmul(q, dc.transpose(k))
    if scaled:
        scores = dc.scale(scores, 1.0 / math.sqrt(w_q.shape[1]))
    attn = dc.softmax_rows(scores, mask)
    return dc.matmul(attn, v), attn


@dataclass
class MaskResult:
    inputs: dc.Tensor        # (P, d + 2) masked features ++ identifier
    masked: np.ndarray       # indices of masked rows
    targets: dc.Tensor | None  # pre-mask features of the masked rows


def mask_polylines(p, ids, prob, rng, maskable=None):
    """Zero the features of a random subset of polylines and append identifiers.

    One uniform draw is consumed per row (eligible or not), and a row is
    masked when its draw falls below ``prob``. Rows with ``maskable`` False
    are never masked.
    """
    n = p.shape[0]
    if maskable is None:
        maskable = np.ones(n, dtype=bool)
    if prob > 0:
        hit = (rng.random(n) < prob) & maskable
    else:
        hit = np.zeros(n, dtype=bool)
    masked = np.flatnonzero(hit)
    feats = dc.mul_const(p, (~hit).astype(np.float64)[:, None]) if masked.size else p
    inputs = dc.concat(feats, dc.Tensor(ids))
    targets = dc.gather_rows(p, masked) if masked.size else None
    return MaskResult(inputs, masked, targets)


def _mlp(x, params, head):
    h = dc.relu(dc.add(dc.matmul(x, params[f"{head}.0.weight"]), params[f"{head}.0.bias"]))
    return dc.add(dc.matmul(h, params[f"{head}.1.weight"]), params[f"{head}.1.bias"])


# ---------------------------------------------------------------- forward


@dataclass
class ForwardResult:
    offsets: dc.Tensor            # (B * T, 2)
    node_preds: dc.Tensor | None  # (M, 2 * width)
    node_targets: dc.Tensor | None
    masked: np.ndarray
    attention: np.ndarray         # (P, P) weights of the last global layer
    polyline_feats: dc.Tensor     # (P, 2 * width), unit rows


def _scaled_inputs(cfg, batch):
    if cfg.coord_scale == 1.0:
        return batch.feats, batch.ids
    feats = batch.feats.copy()
    feats[:, :4] /= cfg.coord_scale
    return feats, batch.ids / cfg.coord_scale


def encode_polylines(params, cfg, batch):
    x = dc.Tensor(_scaled_inputs(cfg, batch)[0])
    n_groups = batch.n_polylines
    for l in range(cfg.subgraph_depth):
        x = subgraph_layer(
            x, batch.groups,
            params[f"subgraph.{l}.weight"], params[f"subgraph.{l}.bias"],
            params[f"subgraph.{l}.ln_gamma"], params[f"subgraph.{l}.ln_beta"],
            n_groups=n_groups, eps=cfg.ln_eps,
        )
    return polyline_features(x, batch.groups, n_groups)


def forward(params, cfg, batch, mode="inference", rng=None):
    """Run the network on a batch of normalized scenes.

    ``mode`` is ``"train_with_mask"`` or ``"inference"``; inference never
    masks and never runs the node decoder.
    """
    if mode not in ("train_with_mask", "inference"):
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(batch, Batch):
        batch = make_batch(batch if isinstance(batch, (list, tuple)) else [batch], cfg.future_steps)
    poly = encode_polylines(params, cfg, batch)
    ids = _scaled_inputs(cfg, batch)[1]

    if mode == "train_with_mask" and cfg.mask_prob > 0:
        if rng is None:
            raise ValueError("masking needs a random generator")
        maskable = np.ones(batch.n_polylines, dtype=bool)
        maskable[batch.target_rows] = False
        m = mask_polylines(poly, ids, cfg.mask_prob, rng, maskable)
    else:
        m = MaskResult(dc.concat(poly, dc.Tensor(ids)), np.zeros(0, dtype=np.intp), None)

    h = m.inputs
    attn = None
    for l in range(cfg.global_depth):
        h, attn = global_attention(
            h, params[f"global.{l}.query"], params[f"global.{l}.key"], params[f"global.{l}.value"],
            mask=batch.attn_mask, scaled=cfg.attention_scaled,
        )

    traj = _mlp(dc.gather_rows(h, batch.target_rows), params, "traj")
    offsets = dc.reshape(traj, (batch.n_scenes * cfg.future_steps, 2))

    node_preds = None
    if mode == "train_with_mask" and m.masked.size:
        node_preds = _mlp(dc.gather_rows(h, m.masked), params, "node")
    return ForwardResult(offsets, node_preds, m.targets, m.masked, attn.data, poly)


def loss(result, gt, cfg):
    """Trajectory NLL plus ``alpha`` times the node-completion Huber loss."""
    traj = dc.gaussian_nll(result.offsets, gt)
    if result.node_preds is None or cfg.alpha == 0:
        return traj
    node = dc.huber(result.node_preds, result.node_targets, cfg.huber_delta)
    return dc.add(traj, dc.scale(node, cfg.alpha))


# ---------------------------------------------------------------- prediction


@dataclass
class Prediction:
    offsets: np.ndarray   # (T, 2) per-step offsets in the target frame
    local: np.ndarray     # (T, 2) cumulative positions in the target frame
    absolute: np.ndarray  # (T, 2) positions in the raw frame

    @classmethod
    def from_offsets(cls, offsets, origin=np.zeros(2), heading=0.0):
        local = np.cumsum(offsets, axis=0)
        return cls(offsets, local, from_frame(local, origin, heading))


def predict(params, cfg, scenes):
    """Inference on normalized scenes; returns (predictions, ForwardResult)."""
    batch = make_batch(scenes)
    res = forward(params, cfg, batch, "inference")
    offs = res.offsets.data.reshape(batch.n_scenes, cfg.future_steps, 2)
    preds = [Prediction.from_offsets(o, s.origin, s.heading) for o, s in zip(offs, scenes)]
    return preds, res
