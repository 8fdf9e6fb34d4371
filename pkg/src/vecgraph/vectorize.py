"""Turning map annotations and agent tracks into vector sets.

Map features are resampled at a fixed arc-length spacing, agent tracks on a
fixed time grid, and consecutive key points are joined into vectors. Scenes
are normalised into a target-centric frame (origin at the target's last
observed position, x-axis along its heading) before encoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, ParameterError, StateError

KINDS = ("lane_boundary", "crosswalk", "stop_sign", "speed_bump", "agent_trajectory")
MAP_KINDS = KINDS[:4]
ATTR_WIDTH = 8  # one-hot(5) + timestamp + 2 spare
NODE_WIDTH = 4 + ATTR_WIDTH

DEFAULT_MAP_INTERVAL = 2.0
DEFAULT_DT = 0.1
STATIONARY_EPS = 1e-6


@dataclass
class Polyline:
    id: int
    kind: str
    points: np.ndarray
    timestamps: np.ndarray | None = None
    extras: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown polyline kind {self.kind!r}")
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if len(self.points) < 1:
            raise DataError(f"polyline {self.id} has no points")
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
            if len(self.timestamps) != len(self.points):
                raise DataError(f"polyline {self.id}: {len(self.timestamps)} timestamps for {len(self.points)} points")
        if len(self.extras) > 2:
            raise DataError(f"polyline {self.id}: at most 2 extra attributes, got {len(self.extras)}")

    def attributes(self, timestamp=0.0):
        a = np.zeros(ATTR_WIDTH)
        a[KINDS.index(self.kind)] = 1.0
        a[5] = timestamp
        a[6:6 + len(self.extras)] = self.extras
        return a


@dataclass
class VectorNode:
    start: np.ndarray
    end: np.ndarray
    attrs: np.ndarray
    polyline_id: int

    @property
    def features(self):
        return np.concatenate([self.start, self.end, self.attrs])


@dataclass
class Scene:
    polylines: list
    target_id: int
    observed_steps: int
    future_gt: np.ndarray | None = None
    frame: str = "raw"
    # set by normalize_scene: the raw-frame origin and heading of the normalised frame
    origin: np.ndarray = field(default_factory=lambda: np.zeros(2))
    heading: float = 0.0
    kind: str | None = None
    _arrays: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.future_gt is not None:
            self.future_gt = np.asarray(self.future_gt, dtype=np.float64).reshape(-1, 2)
        ids = [p.id for p in self.polylines]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate polyline ids in scene: {ids}")
        tgt = self.polyline(self.target_id)
        if tgt.kind != "agent_trajectory":
            raise DataError(f"target polyline {self.target_id} is a {tgt.kind}, not an agent trajectory")
        if self.observed_steps < 2 or self.observed_steps > len(tgt.points):
            raise DataError(f"observed_steps={self.observed_steps} invalid for a {len(tgt.points)}-point target")

    def polyline(self, pid):
        for p in self.polylines:
            if p.id == pid:
                return p
        raise DataError(f"no polyline with id {pid}")

    @property
    def target(self):
        return self.polyline(self.target_id)

    @property
    def last_observed(self):
        return self.target.points[self.observed_steps - 1]


# ---------------------------------------------------------------- sampling


def sample_map_polyline(points, interval=DEFAULT_MAP_INTERVAL):
    """Resample a polyline at uniform arc-length spacing, keeping both ends."""
    if interval <= 0:
        raise ParameterError(f"sampling interval must be positive, got {interval}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise DataError("cannot sample an empty polyline")
    if len(pts) == 1:
        return pts.copy()
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total == 0.0:
        return pts[:1].copy()
    n_full = int(math.floor(total / interval + 1e-9))
    stations = interval * np.arange(n_full + 1)
    if total - stations[-1] > 1e-9 * max(1.0, total):
        stations = np.append(stations, total)
    else:
        stations[-1] = total
    # np.interp needs strictly increasing xp; drop zero-length segments
    keep = np.concatenate([[True], seg > 0])
    x = np.interp(stations, s[keep], pts[keep, 0])
    y = np.interp(stations, s[keep], pts[keep, 1])
    out = np.stack([x, y], axis=1)
    out[0], out[-1] = pts[0], pts[-1]
    return out


def time_grid(t_first, t_last, dt=DEFAULT_DT):
    k0 = math.ceil(t_first / dt - 1e-9)
    k1 = math.floor(t_last / dt + 1e-9)
    return np.round(np.arange(k0, k1 + 1) * dt, 12)


def sample_trajectory(positions, timestamps, dt=DEFAULT_DT, polyline_id=0, extras=()):
    """Interpolate a track linearly in time onto the grid ``0, dt, 2dt, ...``."""
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    ts = np.asarray(timestamps, dtype=np.float64).reshape(-1)
    if len(ts) != len(pts) or len(ts) == 0:
        raise DataError(f"{len(pts)} positions with {len(ts)} timestamps")
    if np.any(np.diff(ts) <= 0):
        raise DataError("trajectory timestamps must be strictly increasing")
    grid = time_grid(ts[0], ts[-1], dt)
    if len(grid) == 0:
        raise DataError(f"track spanning [{ts[0]}, {ts[-1]}] s contains no grid time")
    x = np.interp(grid, ts, pts[:, 0])
    y = np.interp(grid, ts, pts[:, 1])
    return Polyline(polyline_id, "agent_trajectory", np.stack([x, y], axis=1), grid, tuple(extras))


# ---------------------------------------------------------------- vectors


def polyline_arrays(p):
    """(starts, ends, attrs) arrays for a polyline's vectors."""
    pts = p.points
    if len(pts) == 1:
        starts, ends = pts, pts
    else:
        starts, ends = pts[:-1], pts[1:]
    attrs = np.tile(p.attributes(), (len(starts), 1))
    if p.timestamps is not None:
        attrs[:, 5] = p.timestamps[: len(starts)]
    return starts, ends, attrs


def build_vectors(p):
    starts, ends, attrs = polyline_arrays(p)
    return [VectorNode(s.copy(), e.copy(), a, p.id) for s, e, a in zip(starts, ends, attrs)]


def vectors_to_points(nodes):
    """Inverse of ``build_vectors`` for an ordered vector list."""
    if not nodes:
        raise DataError("no vectors")
    first = nodes[0]
    if len(nodes) == 1 and np.array_equal(first.start, first.end):
        return first.start[None].copy()
    return np.vstack([first.start] + [n.end for n in nodes])


def polyline_identifier(nodes):
    """Componentwise minimum of the vectors' start coordinates."""
    if isinstance(nodes, np.ndarray):
        starts = nodes.reshape(-1, 2)
    else:
        starts = np.array([n.start for n in nodes]).reshape(-1, 2)
    if len(starts) == 0:
        raise DataError("polyline identifier of an empty vector list")
    return starts.min(axis=0)


def scene_arrays(s):
    """(features, polyline index per vector, identifiers, target row), cached on the scene."""
    if s._arrays is None:
        feats, groups, ids = [], [], []
        target_row = -1
        for row, p in enumerate(s.polylines):
            starts, ends, attrs = polyline_arrays(p)
            feats.append(np.hstack([starts, ends, attrs]))
            groups.append(np.full(len(starts), row))
            ids.append(starts.min(axis=0))
            if p.id == s.target_id:
                target_row = row
        s._arrays = (np.vstack(feats), np.concatenate(groups), np.vstack(ids), target_row)
    return s._arrays


# ---------------------------------------------------------------- frames


def target_heading(target, observed_steps):
    pts = target.points if isinstance(target, Polyline) else np.asarray(target, dtype=np.float64)
    if observed_steps < 2 or len(pts) < observed_steps:
        raise DataError("heading needs at least two observed points")
    d = pts[observed_steps - 1] - pts[observed_steps - 2]
    if math.hypot(d[0], d[1]) < STATIONARY_EPS:
        return 0.0
    return math.atan2(d[1], d[0])


def _rot(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def to_frame(points, origin, heading):
    """Raw coordinates -> frame centred at ``origin`` with x along ``heading``."""
    return (np.asarray(points, dtype=np.float64) - origin) @ _rot(heading)


def from_frame(points, origin, heading):
    return np.asarray(points, dtype=np.float64) @ _rot(heading).T + origin


def _map_scene(s, fn, frame, origin, heading):
    polys = [replace(p, points=fn(p.points)) for p in s.polylines]
    fut = None if s.future_gt is None else fn(s.future_gt)
    return replace(s, polylines=polys, future_gt=fut, frame=frame, origin=origin, heading=heading)


def normalize_scene(s):
    if s.frame != "raw":
        raise StateError("scene is already normalized")
    origin = s.last_observed.copy()
    heading = target_heading(s.target, s.observed_steps)
    return _map_scene(s, lambda p: to_frame(p, origin, heading), "normalized", origin, heading)


def denormalize_scene(s):
    if s.frame != "normalized":
        raise StateError("scene is not normalized")
    origin, heading = s.origin, s.heading
    return _map_scene(s, lambda p: from_frame(p, origin, heading), "raw", np.zeros(2), 0.0)


def rigid_transform_scene(s, rotation, translation):
    """Apply x -> R(rotation) x + translation to every raw coordinate."""
    if s.frame != "raw":
        raise StateError("rigid motions apply to raw scenes")
    R = _rot(rotation)
    t = np.asarray(translation, dtype=np.float64)
    return _map_scene(s, lambda p: p @ R.T + t, "raw", np.zeros(2), 0.0)


def filter_context(s, context):
    """Keep the polylines a context ablation arm is allowed to see.

    ``none`` keeps only the target track, ``map`` adds map features, and
    ``map+agents`` keeps everything.
    """
    if context == "map+agents":
        keep = s.polylines
    elif context == "map":
        keep = [p for p in s.polylines if p.kind != "agent_trajectory" or p.id == s.target_id]
    elif context == "none":
        keep = [s.target]
    else:
        raise ParameterError(f"unknown context {context!r}")
    return replace(s, polylines=list(keep))
