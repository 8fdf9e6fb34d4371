import numpy as np
import pytest

from vecgraph.errors import DataError
from vecgraph.io import (load_checkpoint, read_history, read_scenes, save_checkpoint, scene_from_dict, scene_to_dict,
                         write_history, write_scenes)
from vecgraph.model import ModelConfig, init_params
from vecgraph.scenegen import generate_dataset
from vecgraph.training import TrainConfig, train


def test_scene_file_round_trip(tmp_path):
    scenes = generate_dataset(6, seed=4)
    path = tmp_path / "s.jsonl"
    write_scenes(path, scenes)
    back = read_scenes(path)
    for a, b in zip(scenes, back):
        assert a.target_id == b.target_id and a.observed_steps == b.observed_steps and a.kind == b.kind
        np.testing.assert_array_equal(a.future_gt, b.future_gt)
        for p, q in zip(a.polylines, b.polylines):
            assert (p.id, p.kind, p.extras) == (q.id, q.kind, q.extras)
            np.testing.assert_array_equal(p.points, q.points)


def test_scene_missing_field():
    d = scene_to_dict(generate_dataset(1)[0])
    del d["target_id"]
    with pytest.raises(DataError, match="target_id"):
        scene_from_dict(d)


def test_bad_json_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(DataError, match=":1:"):
        read_scenes(path)


def test_checkpoint_bitwise_round_trip(tmp_path):
    cfg = ModelConfig(width=8)
    params = init_params(cfg, seed=3)
    params["traj.0.bias"].data[:] = np.random.default_rng(0).normal(size=8) * 1e-300  # subnormal-range values
    save_checkpoint(tmp_path / "c.json", params, cfg, epoch=4, seed=9)
    ck = load_checkpoint(tmp_path / "c.json")
    assert ck["epoch"] == 4 and ck["seed"] == 9 and ck["model_config"] == cfg
    for k, t in params.items():
        assert ck["params"][k].tobytes() == t.data.tobytes()


def test_checkpoint_with_optimizer_and_history(tmp_path):
    scenes = generate_dataset(20, seed=1)
    res = train(scenes, ModelConfig(width=4), TrainConfig(epochs=1, batch_size=8))
    save_checkpoint(tmp_path / "c.json", res.params, res.model_cfg, 0, 0, res.train_cfg, res.adam, res.history)
    ck = load_checkpoint(tmp_path / "c.json")
    assert ck["history"] == res.history
    assert ck["adam"].step == res.adam.step
    assert all(ck["adam"].m[k].tobytes() == res.adam.m[k].tobytes() for k in res.adam.m)
    assert ck["train_config"] == res.train_cfg


def test_checkpoint_wrong_format(tmp_path):
    (tmp_path / "c.json").write_text('{"format": "other"}')
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "c.json")


def test_history_csv_round_trip(tmp_path):
    res = train(generate_dataset(20, seed=1), ModelConfig(width=4), TrainConfig(epochs=2, batch_size=8))
    write_history(tmp_path / "h.csv", res.history)
    assert read_history(tmp_path / "h.csv") == res.history
