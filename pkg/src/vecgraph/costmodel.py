"""Analytical FLOP and parameter counts.

Conventions: one multiply-add is 2 FLOPs; normalisation, activation and
pooling cost 1 FLOP per element touched; concatenation and gathers are free.
Decoders are excluded throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ParameterError


@dataclass
class SceneStats:
    map_polylines: int = 17
    map_vectors: int = 205
    agent_polylines: int = 59
    agent_vectors: int = 590
    n_targets: int = 1

    def __post_init__(self):
        for k, v in vars(self).items():
            if v < 0:
                raise ParameterError(f"{k} must be >= 0")

    @property
    def polylines(self):
        return self.map_polylines + self.agent_polylines

    @property
    def vectors(self):
        return self.map_vectors + self.agent_vectors


@dataclass
class CostReport:
    flops: float = 0.0
    params: int = 0
    breakdown: dict = field(default_factory=dict)  # layer -> {"flops": .., "params": ..}

    def add(self, name, flops=0.0, params=0):
        entry = self.breakdown.setdefault(name, {"flops": 0.0, "params": 0})
        entry["flops"] += flops
        entry["params"] += params
        self.flops += flops
        self.params += params

    def to_dict(self):
        return {"flops": self.flops, "params": self.params, "breakdown": self.breakdown}


# ---------------------------------------------------------------- vector encoder


def count_params(cfg, input_width=None):
    """Closed-form parameter count of the encoder (no decoders)."""
    d = cfg.input_width if input_width is None else input_width
    w, gw = cfg.width, cfg.global_width
    rep = CostReport()
    for l in range(cfg.subgraph_depth):
        rep.add(f"subgraph.{l}", params=d * w + w + 2 * w)
        d = 2 * w
    d = 2 * w + 2
    for l in range(cfg.global_depth):
        rep.add(f"global.{l}", params=3 * d * gw)
        d = gw
    return rep


def vectornet_flops(stats, cfg, input_width=None):
    """Encoder FLOPs for scenes with the given average statistics.

    Each target needs its own normalised copy of the scene, so the total is
    the per-target cost times ``n_targets``.
    """
    d = cfg.input_width if input_width is None else input_width
    w, gw = cfg.width, cfg.global_width
    n, p = stats.vectors, stats.polylines
    rep = CostReport()
    for l in range(cfg.subgraph_depth):
        fl = 2 * n * d * w      # linear
        fl += n * w             # bias
        fl += n * w             # layer norm
        fl += n * w             # relu
        fl += n * w             # per-polyline max-pool
        rep.add(f"subgraph.{l}", flops=fl * stats.n_targets)
        d = 2 * w
    rep.add("polyline_pool", flops=(n * 2 * w + p * 2 * w) * stats.n_targets)  # max-pool + L2 norm
    d = 2 * w + 2
    for l in range(cfg.global_depth):
        fl = 3 * 2 * p * d * gw   # Q, K, V projections
        fl += 2 * p * p * gw      # scores
        fl += p * p               # softmax
        fl += 2 * p * p * gw      # weighted sum of values
        rep.add(f"global.{l}", flops=fl * stats.n_targets)
        d = gw
    p_rep = count_params(cfg, input_width)
    rep.params = p_rep.params
    for k, v in p_rep.breakdown.items():
        rep.breakdown[k]["params"] = v["params"]
    return rep


# ---------------------------------------------------------------- raster baseline

# Slim ResNet-18: stem width followed by the widths of the four stages. The
# widths are a calibration input fitted to the reported 246K/509K/902K
# parameter counts at kernel 3/5/7 and 0.66 GFLOPs at 100x100.
DEFAULT_CHANNELS = (64, 56, 16, 16, 16)
DEFAULT_IN_CHANNELS = 30  # 10 stacked RGB frames
STEM_KERNEL = 7


def _conv(rep, name, cin, cout, k, area, bn=True, relu=True):
    """Conv (no bias) + optional BN/ReLU on an output map of ``area`` pixels."""
    params = cin * cout * k * k
    flops = 2.0 * cin * cout * k * k * area
    if bn:
        params += 2 * cout
        flops += cout * area
    if relu:
        flops += cout * area
    rep.add(name, flops, params)


def convnet_flops(resolution, kernel=3, channels=DEFAULT_CHANNELS, in_channels=DEFAULT_IN_CHANNELS):
    """Backbone cost of a ResNet-18-style ConvNet on a square raster.

    Only the 3x3 convolutions of the residual blocks take ``kernel``; the
    stem and the 1x1 shortcut projections are fixed. Feature maps are
    tracked as real-valued areas ``(resolution / stride)^2`` so the FLOP
    count scales exactly with the input area.
    """
    if resolution <= 0 or kernel < 1 or kernel % 2 == 0:
        raise ParameterError(f"need positive resolution and odd kernel >= 1, got {resolution}, {kernel}")
    if len(channels) != 5:
        raise ParameterError("channel table needs a stem width plus four stage widths")
    rep = CostReport()
    stem, stages = channels[0], channels[1:]
    side = resolution / 2.0
    _conv(rep, "stem", in_channels, stem, STEM_KERNEL, side * side)
    side /= 2.0
    rep.add("maxpool", stem * side * side * 9)
    cin = stem
    for i, cout in enumerate(stages):
        stride = 1 if i == 0 else 2
        side /= stride
        area = side * side
        for blk in range(2):
            name = f"stage{i + 1}.block{blk}"
            _conv(rep, f"{name}.conv1", cin, cout, kernel, area)
            _conv(rep, f"{name}.conv2", cout, cout, kernel, area, relu=False)
            if blk == 0 and (stride != 1 or cin != cout):
                _conv(rep, f"{name}.shortcut", cin, cout, 1, area, relu=False)
            rep.add(f"{name}.residual", 2 * cout * area)  # add + relu
            cin = cout
    return rep


def flops_table(cfg, stats=None, channels=DEFAULT_CHANNELS, in_channels=DEFAULT_IN_CHANNELS):
    """Rows (name, GFLOPs, params) comparing raster backbones with the vector encoder."""
    stats = stats or SceneStats()
    rows = []
    for res, k in ((100, 3), (200, 3), (400, 3), (400, 5), (400, 7)):
        r = convnet_flops(res, k, channels, in_channels)
        rows.append((f"R18-k{k}-r{res}", r.flops / 1e9, r.params, ""))
    v = vectornet_flops(SceneStats(stats.map_polylines, stats.map_vectors, stats.agent_polylines,
                                   stats.agent_vectors, 1), cfg)
    rows.append(("Vector graph", v.flops / 1e9, v.params, "x n"))
    return rows


def format_flops_table(rows):
    lines = [f"{'Model':<16} {'FLOPs':>12} {'#Param':>9}", "-" * 39]
    for name, gflops, params, suffix in rows:
        fl = f"{gflops:.3f}G" + (f" {suffix}" if suffix else "")
        lines.append(f"{name:<16} {fl:>12} {params / 1000:>8.0f}K")
    return "\n".join(lines)
