import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecgraph.errors import DataError, ParameterError, StateError
from vecgraph.vectorize import (NODE_WIDTH, Polyline, Scene, VectorNode, build_vectors, denormalize_scene,
                                filter_context, normalize_scene, polyline_identifier, sample_map_polyline,
                                sample_trajectory, scene_arrays, target_heading, vectors_to_points)

from helpers import arc_length_walker


def track(points, pid=1):
    pts = np.asarray(points, dtype=float)
    return Polyline(pid, "agent_trajectory", pts, np.arange(len(pts)) * 0.1)


def small_scene(target_pts, extra=()):
    polys = [track(target_pts, pid=1), *extra]
    return Scene(polys, target_id=1, observed_steps=len(target_pts))


# ---------------------------------------------------------------- map sampling


def test_sample_segment_interval_5():
    out = sample_map_polyline([(0, 0), (10, 0)], 5)
    np.testing.assert_allclose(out, [(0, 0), (5, 0), (10, 0)])


def test_sample_single_point_passes_through():
    np.testing.assert_array_equal(sample_map_polyline([(2.0, 3.0)], 2.0), [(2.0, 3.0)])


def test_sample_l_shape_matches_walker():
    pts = [(0, 0), (3.5, 0), (3.5, 4.25)]
    np.testing.assert_allclose(sample_map_polyline(pts, 1.0), arc_length_walker(pts, 1.0), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=6),
       st.floats(0.3, 7.0))
def test_sample_matches_walker_on_random_polylines(pts, interval):
    pts = np.array(pts)
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if np.any(seg < 1e-3):
        return
    np.testing.assert_allclose(sample_map_polyline(pts, interval), arc_length_walker(pts, interval), atol=1e-9)


def test_sample_keeps_endpoints_and_spacing():
    pts = [(0, 0), (7.3, 0)]
    out = sample_map_polyline(pts, 2.0)
    np.testing.assert_array_equal(out[0], pts[0])
    np.testing.assert_array_equal(out[-1], pts[-1])
    np.testing.assert_allclose(np.diff(out[:-1, 0]), 2.0)


@pytest.mark.parametrize("interval", [0.0, -1.0])
def test_sample_nonpositive_interval(interval):
    with pytest.raises(ParameterError):
        sample_map_polyline([(0, 0), (1, 0)], interval)


# ---------------------------------------------------------------- trajectory sampling


def test_trajectory_on_grid_is_identity():
    pts = np.random.default_rng(0).normal(size=(8, 2))
    ts = np.arange(8) * 0.1
    p = sample_trajectory(pts, ts)
    np.testing.assert_allclose(p.points, pts, atol=1e-12)
    np.testing.assert_allclose(p.timestamps, ts, atol=1e-12)


def test_trajectory_half_step_keeps_every_other():
    pts = np.random.default_rng(1).normal(size=(11, 2))
    p = sample_trajectory(pts, np.arange(11) * 0.05)
    np.testing.assert_allclose(p.points, pts[::2], atol=1e-12)


def test_trajectory_interpolates_linearly_in_time():
    # oracle: position at time t on a straight track at 3 m/s
    ts = np.array([0.0, 0.13, 0.37, 0.61])
    p = sample_trajectory(np.stack([3 * ts, np.zeros(4)], 1), ts)
    np.testing.assert_allclose(p.points[:, 0], 3 * np.array([0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), atol=1e-12)


def test_trajectory_constant_position():
    p = sample_trajectory(np.tile([4.0, -2.0], (5, 1)), [0, 0.07, 0.2, 0.33, 0.4])
    np.testing.assert_array_equal(p.points, np.tile([4.0, -2.0], (5, 1)))


def test_trajectory_unordered_timestamps():
    with pytest.raises(DataError):
        sample_trajectory([(0, 0), (1, 0), (2, 0)], [0.0, 0.2, 0.1])


# ---------------------------------------------------------------- vectors


def test_build_vectors_three_points():
    vs = build_vectors(Polyline(0, "lane_boundary", [(0, 0), (1, 0), (1, 1)]))
    assert [(tuple(v.start), tuple(v.end)) for v in vs] == [((0, 0), (1, 0)), ((1, 0), (1, 1))]
    assert all(v.polyline_id == 0 and v.attrs[0] == 1.0 for v in vs)


def test_build_vectors_point_feature():
    (v,) = build_vectors(Polyline(5, "stop_sign", [(2, 3)]))
    assert tuple(v.start) == tuple(v.end) == (2, 3)
    assert len(v.features) == NODE_WIDTH


@pytest.mark.parametrize("n", [1, 2, 7])
def test_build_vectors_round_trip(n):
    pts = np.random.default_rng(n).normal(size=(n, 2))
    np.testing.assert_array_equal(vectors_to_points(build_vectors(Polyline(0, "crosswalk", pts))), pts)


def test_trajectory_vectors_carry_start_timestamp():
    vs = build_vectors(track([(0, 0), (1, 0), (2, 0)]))
    assert [v.attrs[5] for v in vs] == [0.0, 0.1]
    assert all(v.attrs[4] == 1.0 for v in vs)


# ---------------------------------------------------------------- identifier


def _node(start):
    return VectorNode(np.asarray(start, float), np.zeros(2), np.zeros(8), 0)


def test_identifier_minimum():
    np.testing.assert_array_equal(polyline_identifier([_node((2, 3)), _node((1, 7))]), (1, 3))


def test_identifier_single():
    np.testing.assert_array_equal(polyline_identifier([_node((4, -1))]), (4, -1))


def test_identifier_permutation_invariant():
    nodes = [_node(p) for p in np.random.default_rng(3).normal(size=(6, 2))]
    np.testing.assert_array_equal(polyline_identifier(nodes), polyline_identifier(nodes[::-1]))


def test_identifier_empty():
    with pytest.raises(DataError):
        polyline_identifier([])


# ---------------------------------------------------------------- heading and frames


@pytest.mark.parametrize("pts, expected", [
    ([(0, 0), (1, 0)], 0.0),
    ([(0, 0), (0, 2)], math.pi / 2),
    ([(3, 3), (3, 3)], 0.0),
    ([(1, 1), (1 + 5e-7, 1)], 0.0),
])
def test_target_heading(pts, expected):
    assert target_heading(track(pts), 2) == pytest.approx(expected)


def test_target_heading_needs_two_points():
    with pytest.raises(DataError):
        target_heading(np.array([[0.0, 0.0]]), 1)


def test_normalize_translation():
    lane = Polyline(0, "lane_boundary", [(12, 5), (14, 5)])
    s = normalize_scene(small_scene([(9, 5), (10, 5)], [lane]))
    np.testing.assert_allclose(s.polyline(0).points[0], (2, 0), atol=1e-12)
    assert s.frame == "normalized"


def test_normalize_rotation():
    ahead = Polyline(0, "stop_sign", [(0, 1)])
    s = normalize_scene(small_scene([(0, -1), (0, 0)], [ahead]))
    np.testing.assert_allclose(s.polyline(0).points[0], (1, 0), atol=1e-12)


def test_normalize_round_trip():
    rng = np.random.default_rng(7)
    raw = small_scene(rng.normal(size=(4, 2)) * 30, [Polyline(0, "crosswalk", rng.normal(size=(5, 2)) * 30)])
    raw.future_gt = rng.normal(size=(3, 2))
    back = denormalize_scene(normalize_scene(raw))
    for a, b in zip(raw.polylines, back.polylines):
        assert np.max(np.abs(a.points - b.points)) <= 1e-12
    assert np.max(np.abs(raw.future_gt - back.future_gt)) <= 1e-12


def test_normalize_twice_is_state_error():
    s = normalize_scene(small_scene([(0, 0), (1, 0)]))
    with pytest.raises(StateError):
        normalize_scene(s)


# ---------------------------------------------------------------- scene structure


def test_scene_rejects_non_agent_target():
    with pytest.raises(DataError):
        Scene([Polyline(0, "lane_boundary", [(0, 0), (1, 0)])], target_id=0, observed_steps=2)


def test_scene_rejects_single_observation():
    with pytest.raises(DataError):
        small_scene([(0, 0)])


def test_scene_arrays_layout():
    s = small_scene([(0, 0), (1, 0), (2, 0)], [Polyline(7, "stop_sign", [(5, 5)])])
    feats, groups, ids, target_row = scene_arrays(s)
    assert feats.shape == (3, NODE_WIDTH)
    assert groups.tolist() == [0, 0, 1]
    assert target_row == 0
    np.testing.assert_array_equal(ids, [(0, 0), (5, 5)])


def test_filter_context():
    other = track([(5, 5), (6, 5)], pid=2)
    lane = Polyline(0, "lane_boundary", [(0, 1), (9, 1)])
    s = small_scene([(0, 0), (1, 0)], [other, lane])
    assert {p.id for p in filter_context(s, "none").polylines} == {1}
    assert {p.id for p in filter_context(s, "map").polylines} == {0, 1}
    assert {p.id for p in filter_context(s, "map+agents").polylines} == {0, 1, 2}
    with pytest.raises(ParameterError):
        filter_context(s, "agents")
