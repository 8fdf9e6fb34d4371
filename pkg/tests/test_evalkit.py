import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vecgraph.errors import DataError, ParameterError
from vecgraph.evalkit import (Arm, ablate, ablation_csv, ade, constant_velocity, de_at, evaluate_constant_velocity,
                              format_table, report)
from vecgraph.model import ModelConfig
from vecgraph.scenegen import ScenarioSpec, generate, generate_dataset
from vecgraph.training import TrainConfig


def naive_ade(pred, gt):
    total = 0.0
    for (px, py), (gx, gy) in zip(pred, gt):
        total += math.sqrt((px - gx) ** 2 + (py - gy) ** 2)
    return total / len(pred)


def test_ade_identical():
    x = np.random.default_rng(0).normal(size=(6, 2))
    assert ade(x, x) == 0.0


def test_ade_example():
    assert ade([(0, 0), (3, 4)], [(0, 0), (0, 0)]) == 2.5


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2**31))
def test_ade_matches_loop(T, seed):
    rng = np.random.default_rng(seed)
    p, g = rng.normal(size=(T, 2)) * 10, rng.normal(size=(T, 2)) * 10
    assert abs(ade(p, g) - naive_ade(p, g)) <= 1e-12


def test_ade_length_mismatch():
    with pytest.raises(DataError):
        ade(np.zeros((3, 2)), np.zeros((4, 2)))


def test_de_at_final_step():
    rng = np.random.default_rng(1)
    p, g = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    assert de_at(p, g, 3.0) == pytest.approx(np.linalg.norm(p[-1] - g[-1]), rel=1e-15)


def test_de_at_one_second():
    gt = np.zeros((30, 2))
    pred = gt.copy()
    pred[9] = (0, 1)
    assert de_at(pred, gt, 1.0, dt=0.1) == 1.0


def test_de_at_bounded_by_cumulative_step_error():
    # a prediction that drifts by at most e per step is at most t/dt * e off at time t
    rng = np.random.default_rng(2)
    gt = np.cumsum(rng.normal(size=(30, 2)), 0)
    drift = rng.uniform(-1, 1, size=(30, 2)) * 0.05
    pred = gt + np.cumsum(drift, 0)
    e = np.max(np.linalg.norm(drift, axis=1))
    for t in (1.0, 2.0, 3.0):
        assert de_at(pred, gt, t) <= round(t / 0.1) * e + 1e-12


def test_de_at_off_grid():
    with pytest.raises(ParameterError):
        de_at(np.zeros((30, 2)), np.zeros((30, 2)), 1.05)


def test_ade_is_mean_of_step_errors():
    rng = np.random.default_rng(3)
    p, g = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    steps = [de_at(p, g, k / 10) for k in range(1, 31)]
    assert abs(ade(p, g) - np.mean(steps)) <= 1e-12


def test_metrics_rigid_motion_invariant():
    rng = np.random.default_rng(4)
    p, g = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    c, s = math.cos(0.7), math.sin(0.7)
    R, t = np.array([[c, -s], [s, c]]), np.array([100.0, -3.0])
    assert ade(p @ R.T + t, g @ R.T + t) == pytest.approx(ade(p, g), abs=1e-12)
    assert de_at(p @ R.T + t, g @ R.T + t, 2.0) == pytest.approx(de_at(p, g, 2.0), abs=1e-12)


def test_constant_velocity_example():
    np.testing.assert_array_equal(constant_velocity([(0, 0), (1, 0)], 3), [(2, 0), (3, 0), (4, 0)])


def test_constant_velocity_stationary():
    np.testing.assert_array_equal(constant_velocity([(5, 5)] * 4, 3), [(5, 5)] * 3)


def test_constant_velocity_needs_two_points():
    with pytest.raises(DataError):
        constant_velocity([(0, 0)], 3)


def test_constant_velocity_straight_scene():
    s = generate(ScenarioSpec(kind="straight", seed=3))
    assert evaluate_constant_velocity([s]).ade <= 1e-9


def test_report_aggregates():
    rep = report([np.zeros((30, 2))] * 2, [np.ones((30, 2)), np.zeros((30, 2))])
    assert rep.ade == pytest.approx(math.sqrt(2) / 2)
    assert rep.n_scenes == 2


# ---------------------------------------------------------------- ablation


@pytest.fixture(scope="module")
def tiny_split():
    scenes = generate_dataset(24, seed=8)
    return scenes[:18], scenes[18:]


def test_none_arm_sees_only_target(tiny_split, monkeypatch):
    seen = []
    import vecgraph.training as tr

    real = tr.train

    def spy(dataset, *a, **kw):
        seen.append({len(s.polylines) for s in dataset})
        return real(dataset, *a, **kw)

    monkeypatch.setattr(tr, "train", spy)
    ablate(*tiny_split, [Arm("none", False)], ModelConfig(width=4), TrainConfig(epochs=1, batch_size=8))
    assert seen == [{1}]


def test_single_arm_table(tiny_split):
    rows = ablate(*tiny_split, [Arm("map", True)], ModelConfig(width=4), TrainConfig(epochs=1, batch_size=8))
    assert len(rows) == 1
    table = format_table(rows).splitlines()
    assert len(table) == 3 and table[2].startswith("map")
    assert ablation_csv(rows).splitlines()[1].startswith("map,yes,")


def test_ablate_needs_arms(tiny_split):
    with pytest.raises(ParameterError):
        ablate(*tiny_split, [], ModelConfig(width=4), TrainConfig(epochs=1))


def test_arm_rejects_unknown_context():
    with pytest.raises(ParameterError):
        Arm("agents")
