"""Deterministic synthetic driving scenes.

Every scene is a two-lane road (lane centrelines plus outer edges, cut into
short map segments), a target vehicle, a few other vehicles and some point or
polygon map features. Scenes are built in a road frame where the target's
last observed position is the origin and the road initially runs along +x,
then moved by a random rigid motion.

The maneuver is chosen so that context matters: turning roads bend after the
observed window, so only the map reveals the turn; a lane change is always
triggered by a slow lead vehicle in the target's lane, so only the other
agents reveal it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .vectorize import DEFAULT_DT, DEFAULT_MAP_INTERVAL, Polyline, Scene, sample_map_polyline

SCENARIO_KINDS = ("stationary", "straight", "left_turn", "right_turn", "lane_change")

LANE_WIDTH = 3.5
SPEED_RANGE = (5.0, 15.0)
RADIUS_RANGE = (8.0, 30.0)
TURN_START_RANGE = (0.0, 12.0)
ROAD_BEHIND = 30.0
ROAD_AHEAD = 80.0
SEGMENT_LENGTH = 20.0
# a slow vehicle this close ahead blocks the lane and triggers a lane change;
# free-flowing leaders in other scenarios keep well beyond that zone
BLOCKING_GAP = (8.0, 18.0)
BLOCKING_SPEED = (0.0, 0.3)  # fraction of the target's speed
FREE_GAP = (30.0, 45.0)

DEFAULT_MIX = {"straight": 0.25, "left_turn": 0.25, "right_turn": 0.25, "lane_change": 0.25}


@dataclass
class ScenarioSpec:
    kind: str = "straight"
    n_map_polylines: int = 2     # point/polygon features on top of the lane geometry
    n_other_agents: int = 2
    noise_std: float = 0.0
    seed: int = 0
    observed_steps: int = 10
    future_steps: int = 30
    # optional overrides of the sampled geometry
    speed: float | None = None
    radius: float | None = None
    turn_start: float | None = None
    random_pose: bool = True

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ParameterError(f"unknown scenario kind {self.kind!r}")
        if self.n_map_polylines < 0 or self.n_other_agents < 0:
            raise ParameterError("polyline and agent counts must be >= 0")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be >= 0")
        if self.observed_steps < 2 or self.future_steps < 1:
            raise ParameterError("need >= 2 observed and >= 1 future steps")


class Road:
    """Centreline of the target's lane: straight, then optionally a quarter arc."""

    def __init__(self, turn=0, radius=15.0, turn_start=0.0):
        self.turn = turn
        self.radius = radius
        self.s0 = turn_start
        self.arc = 0.5 * math.pi * radius if turn else 0.0

    def pose(self, s):
        """Centreline point and heading at arc length(s) ``s``."""
        s = np.asarray(s, dtype=np.float64)
        x = s.copy()
        y = np.zeros_like(s)
        h = np.zeros_like(s)
        if self.turn:
            R, sg = self.radius, self.turn
            on = (s > self.s0) & (s <= self.s0 + self.arc)
            th = (s[on] - self.s0) / R
            x[on] = self.s0 + R * np.sin(th)
            y[on] = sg * R * (1 - np.cos(th))
            h[on] = sg * th
            after = s > self.s0 + self.arc
            rest = s[after] - self.s0 - self.arc
            x[after] = self.s0 + R
            y[after] = sg * R + sg * rest
            h[after] = sg * 0.5 * math.pi
        return np.stack([x, y], axis=-1), h

    def point(self, s, d=0.0):
        """Point at arc length ``s`` shifted ``d`` metres to the left."""
        p, h = self.pose(s)
        d = np.asarray(d, dtype=np.float64)
        return p + d[..., None] * np.stack([-np.sin(h), np.cos(h)], axis=-1)


def _segments(points, seg_vectors):
    """Cut a sampled polyline into pieces of ``seg_vectors`` vectors sharing endpoints."""
    out = []
    n = len(points)
    i = 0
    while i < n - 1:
        j = min(i + seg_vectors, n - 1)
        out.append(points[i:j + 1])
        i = j
    return out


def _rotate(points, theta, shift):
    c, s = math.cos(theta), math.sin(theta)
    return np.asarray(points) @ np.array([[c, s], [-s, c]]) + shift


def generate(spec):
    """Build one scene from a spec. Equal specs give identical scenes."""
    rng = np.random.default_rng(spec.seed)
    dt = DEFAULT_DT
    kind = spec.kind
    speed = spec.speed if spec.speed is not None else rng.uniform(*SPEED_RANGE)
    if kind == "stationary":
        speed = 0.0
    turn = {"left_turn": 1, "right_turn": -1}.get(kind, 0)
    radius = spec.radius if spec.radius is not None else rng.uniform(*RADIUS_RANGE)
    turn_start = spec.turn_start if spec.turn_start is not None else rng.uniform(*TURN_START_RANGE)
    road = Road(turn, radius, turn_start)
    # the other lane is on the left or on the right of the target's lane
    side = 1.0 if rng.random() < 0.5 else -1.0
    other_d = side * LANE_WIDTH

    obs, fut = spec.observed_steps, spec.future_steps
    t_obs = np.round(np.arange(obs) * dt, 12)
    rel_obs = (np.arange(obs) - (obs - 1)) * dt  # time relative to the last observation
    rel_fut = np.arange(1, fut + 1) * dt

    # ---- target motion
    s_obs = speed * rel_obs
    s_fut = speed * rel_fut
    d_obs = np.zeros(obs)
    d_fut = np.zeros(fut)
    if kind == "lane_change":
        lc_start = rng.uniform(0.0, 0.5) * speed
        lc_len = max(rng.uniform(2.0, 3.0) * speed, 1e-6)
        u = np.clip((s_fut - lc_start) / lc_len, 0.0, 1.0)
        d_fut = other_d * 0.5 * (1 - np.cos(math.pi * u))
    target_obs = road.point(s_obs, d_obs)
    future = road.point(s_fut, d_fut)

    polylines = []
    next_id = 0

    def add(kind_, pts, ts=None, extras=()):
        nonlocal next_id
        polylines.append(Polyline(next_id, kind_, np.asarray(pts, dtype=np.float64).reshape(-1, 2), ts, extras))
        next_id += 1
        return next_id - 1

    # ---- lanes: both centrelines (flagged through the first spare attribute) and outer edges
    s_road = np.arange(-ROAD_BEHIND, ROAD_AHEAD + 0.5, 0.5)
    seg_vectors = int(round(SEGMENT_LENGTH / DEFAULT_MAP_INTERVAL))
    edges = sorted([-0.5 * LANE_WIDTH, other_d + side * 0.5 * LANE_WIDTH] if side > 0
                   else [0.5 * LANE_WIDTH, other_d - 0.5 * LANE_WIDTH])
    for d, flag in ((0.0, 1.0), (other_d, 1.0), (edges[0], 0.0), (edges[1], 0.0)):
        line = sample_map_polyline(road.point(s_road, np.full_like(s_road, d)), DEFAULT_MAP_INTERVAL)
        for seg in _segments(line, seg_vectors):
            add("lane_boundary", seg, extras=(flag,))

    # ---- point and polygon map features along the road
    for _ in range(spec.n_map_polylines):
        fk = rng.choice(["crosswalk", "stop_sign", "speed_bump"])
        s_f = rng.uniform(-10.0, 60.0)
        lo, hi = min(edges), max(edges)
        if fk == "stop_sign":
            add(fk, road.point(np.array([s_f]), np.array([hi + 1.0 if rng.random() < 0.5 else lo - 1.0])))
        elif fk == "speed_bump":
            add(fk, road.point(np.array([s_f, s_f]), np.array([lo, hi])))
        else:
            ss = np.array([s_f, s_f, s_f + 3.0, s_f + 3.0, s_f])
            dd = np.array([lo, hi, hi, lo, lo])
            add(fk, road.point(ss, dd))

    # ---- target
    target_id = add("agent_trajectory", target_obs, t_obs)

    # ---- other agents
    def add_agent(s_now, d, v):
        pts = road.point(s_now + v * rel_obs, np.full(obs, d))
        return add("agent_trajectory", pts, t_obs)

    remaining = spec.n_other_agents
    if kind == "lane_change" and remaining > 0:
        add_agent(rng.uniform(*BLOCKING_GAP), 0.0, speed * rng.uniform(*BLOCKING_SPEED))
        remaining -= 1
    elif kind in ("straight", "left_turn", "right_turn") and remaining > 0 and rng.random() < 0.5:
        add_agent(rng.uniform(*FREE_GAP), 0.0, speed * rng.uniform(1.0, 1.3))
        remaining -= 1
    for _ in range(remaining):
        add_agent(rng.uniform(-25.0, 40.0), other_d, rng.uniform(*SPEED_RANGE))

    # ---- random global pose, drawn before the noise so the noise level leaves the geometry alone
    theta = rng.uniform(-math.pi, math.pi)
    shift = rng.uniform(-200.0, 200.0, size=2)

    # ---- observation noise on observed points only
    if spec.noise_std > 0:
        for p in polylines:
            if p.kind == "agent_trajectory":
                p.points = p.points + rng.normal(0.0, spec.noise_std, p.points.shape)

    if spec.random_pose:
        for p in polylines:
            p.points = _rotate(p.points, theta, shift)
        future = _rotate(future, theta, shift)

    return Scene(polylines, target_id, obs, future, "raw", kind=kind)


def _normalized_mix(mix):
    if isinstance(mix, dict):
        items = list(mix.items())
    else:
        items = list(mix)
    for k, w in items:
        if k not in SCENARIO_KINDS:
            raise ParameterError(f"unknown scenario kind {k!r} in mix")
        if w < 0 or not math.isfinite(w):
            raise ParameterError(f"mix weight for {k} must be finite and >= 0")
    total = sum(w for _, w in items)
    if total <= 0:
        raise ParameterError("mix weights are all zero")
    return [k for k, _ in items], np.array([w / total for _, w in items])


def _draw_kind(g, kinds, probs):
    return kinds[int(g.choice(len(kinds), p=probs))]


def draw_kinds(n, mix=None, seed=0):
    """The scenario kinds ``generate_dataset`` would produce, without building scenes."""
    kinds, probs = _normalized_mix(DEFAULT_MIX if mix is None else mix)
    return [_draw_kind(np.random.default_rng([seed, i]), kinds, probs) for i in range(n)]


def generate_dataset(n, mix=None, seed=0, noise_std=0.05, map_polylines=(1, 3), other_agents=(1, 3),
                     observed_steps=10, future_steps=30):
    """``n`` scenes with kinds drawn from ``mix``.

    Scene ``i`` depends only on ``(seed, i)``, so datasets are prefix-stable
    and can be generated in any order.
    """
    kinds, probs = _normalized_mix(DEFAULT_MIX if mix is None else mix)
    scenes = []
    for i in range(n):
        g = np.random.default_rng([seed, i])
        kind = _draw_kind(g, kinds, probs)
        spec = ScenarioSpec(
            kind=kind,
            n_map_polylines=int(g.integers(map_polylines[0], map_polylines[1] + 1)),
            n_other_agents=int(g.integers(other_agents[0], other_agents[1] + 1)),
            noise_std=noise_std,
            seed=int(g.integers(2**63 - 1)),
            observed_steps=observed_steps,
            future_steps=future_steps,
        )
        scenes.append(generate(spec))
    return scenes


def parse_mix(text):
    """``"straight=1,left_turn=2"`` -> ``{"straight": 1.0, "left_turn": 2.0}``."""
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        k, _, w = part.partition("=")
        try:
            out[k.strip()] = float(w) if w else 1.0
        except ValueError:
            raise ParameterError(f"bad mix weight in {part!r}") from None
    _normalized_mix(out)
    return out
