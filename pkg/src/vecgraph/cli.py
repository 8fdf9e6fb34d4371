"""Command-line entry point.

    vecgraph [--config FILE] {generate,train,eval,predict,analyze,render,ablate} ...

Settings resolve as flags > config file > built-in defaults. The config file
is JSON; keys may sit at the top level or under a section named after the
subcommand (the section wins). Every command that writes artifacts writes
them into ``--out DIR`` together with a ``manifest.json``.

Exit codes: 0 success, 2 usage error, 1 runtime error. ``VECGRAPH_THREADS``
caps the BLAS thread pool; nothing else is read from the environment.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import costmodel, evalkit, io, scenegen
from .errors import ParameterError, VecGraphError
from .model import ModelConfig, predict
from .training import TrainConfig, split_dataset, train
from .vectorize import filter_context, normalize_scene

log = logging.getLogger("vecgraph")

THREADS_ENV = "VECGRAPH_THREADS"
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- option tables

# name -> (type, default, help). ``None`` defaults mean "required" only where noted in REQUIRED.
MODEL_OPTS = {
    "width": (int, 64, "hidden width of the polyline subgraph"),
    "global_width": (int, None, "global attention width (default 2 * width)"),
    "subgraph_depth": (int, 3, "number of subgraph layers"),
    "global_depth": (int, 1, "number of global attention layers"),
    "alpha": (float, 1.0, "weight of the node completion loss (0 turns node completion off)"),
    "mask_prob": (float, 0.15, "probability of masking a context polyline"),
    "coord_scale": (float, 10.0, "metres per network input unit"),
    "attention_scaled": (bool, False, "divide attention scores by sqrt(width)"),
}
TRAIN_OPTS = {
    "epochs": (int, 25, "training epochs"),
    "lr": (float, 0.001, "initial learning rate"),
    "batch_size": (int, 32, "scenes per batch"),
    "decay_factor": (float, 0.3, "learning-rate decay factor"),
    "decay_every": (int, 5, "epochs between decays"),
    "seed": (int, 0, "random seed"),
    "val_fraction": (float, 0.2, "held-out fraction when --val is not given"),
}
COMMANDS = {
    "generate": {
        "out": (str, "data", "output directory"),
        "n": (int, 1000, "number of scenes"),
        "seed": (int, 0, "random seed"),
        "mix": (str, "straight=1,left_turn=1,right_turn=1,lane_change=1", "scenario mix, kind=weight,..."),
        "noise": (float, 0.05, "observation noise std in metres"),
        "map_polylines": (str, "1-3", "range of extra map features per scene"),
        "other_agents": (str, "1-3", "range of other agents per scene"),
    },
    "train": {
        "data": (str, None, "scene file (JSON Lines)"),
        "val": (str, None, "held-out scene file"),
        "out": (str, "run", "output directory"),
        "resume": (str, None, "checkpoint to continue from"),
        "context": (str, "map+agents", "polylines the model sees: none, map or map+agents"),
        **MODEL_OPTS,
        **TRAIN_OPTS,
    },
    "eval": {
        "checkpoint": (str, None, "checkpoint file"),
        "data": (str, None, "scene file"),
        "out": (str, None, "optional output directory for eval.json"),
        "context": (str, "map+agents", "polylines the model sees"),
    },
    "predict": {
        "checkpoint": (str, None, "checkpoint file"),
        "data": (str, None, "scene file"),
        "index": (int, None, "predict only this scene (default: all)"),
        "out": (str, None, "optional output directory for prediction.json"),
        "context": (str, "map+agents", "polylines the model sees"),
    },
    "analyze": {
        "out": (str, None, "optional output directory"),
        "width": (int, 64, "hidden width"),
        "global_width": (int, None, "global attention width (default 2 * width)"),
        "subgraph_depth": (int, 3, "number of subgraph layers"),
        "global_depth": (int, 1, "number of global attention layers"),
        "map_polylines": (int, 17, "average map polylines per scene"),
        "map_vectors": (int, 205, "average map vectors per scene"),
        "agent_polylines": (int, 59, "average agent polylines per scene"),
        "agent_vectors": (int, 590, "average agent vectors per scene"),
        "n_targets": (int, 1, "targets predicted per scene"),
    },
    "render": {
        "data": (str, None, "scene file"),
        "index": (int, 0, "scene to draw"),
        "prediction": (str, None, "prediction.json from the predict command"),
        "checkpoint": (str, None, "checkpoint to predict with instead of --prediction"),
        "out": (str, "render", "output directory"),
    },
    "ablate": {
        "data": (str, None, "training scene file"),
        "val": (str, None, "held-out scene file"),
        "out": (str, "ablation", "output directory"),
        "contexts": (str, "none,map,map+agents", "comma-separated context arms"),
        "node_completion": (str, "both", "yes, no or both"),
        **MODEL_OPTS,
        **TRAIN_OPTS,
    },
}
REQUIRED = {
    "train": ("data",),
    "eval": ("checkpoint", "data"),
    "predict": ("checkpoint", "data"),
    "render": ("data",),
    "ablate": ("data",),
}
HELP = {
    "generate": "write synthetic scenes",
    "train": "train a model",
    "eval": "report displacement errors",
    "predict": "predict target trajectories",
    "analyze": "FLOP and parameter tables",
    "render": "draw a scene as SVG",
    "ablate": "train and compare context / node-completion arms",
}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    p = argparse.ArgumentParser(prog="vecgraph", description="Vectorized scene encoding and trajectory prediction.")
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for cmd, opts in COMMANDS.items():
        sp = sub.add_parser(cmd, help=HELP[cmd], description=HELP[cmd])
        for name, (typ, default, hlp) in opts.items():
            shown = f" (default: {default})" if default is not None else ""
            if typ is bool:
                sp.add_argument(_flag(name), dest=name, action=argparse.BooleanOptionalAction,
                                default=argparse.SUPPRESS, help=hlp + shown)
            else:
                sp.add_argument(_flag(name), dest=name, type=typ, default=argparse.SUPPRESS, help=hlp + shown)
    return p


def _coerce(cmd, key, value):
    typ = COMMANDS[cmd][key][0]
    if value is None:
        return None
    if typ is bool:
        if not isinstance(value, bool):
            raise UsageError(f"config key {key!r} must be true or false")
        return value
    if typ is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise UsageError(f"config key {key!r} must be an integer")
    if typ is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise UsageError(f"config key {key!r} must be a number")
    return typ(value)


def resolve_settings(cmd, flags, config_path=None):
    """Merge defaults, the config file and explicit flags (in increasing precedence).

    Returns ``(settings, explicit)`` where ``explicit`` names the keys set by
    a flag or the config file rather than by a default.
    """
    opts = COMMANDS[cmd]
    settings = {k: v[1] for k, v in opts.items()}
    explicit = set()
    if config_path:
        try:
            doc = json.loads(Path(config_path).read_text())
        except OSError as e:
            raise UsageError(f"cannot read config file {config_path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {config_path} is not valid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        section = doc.get(cmd, {})
        if not isinstance(section, dict):
            raise UsageError(f"config section {cmd!r} must be an object")
        flat = {k: v for k, v in doc.items() if k not in COMMANDS}
        for source in (flat, section):
            for k, v in source.items():
                k = k.replace("-", "_")
                if k in opts:
                    settings[k] = _coerce(cmd, k, v)
                    explicit.add(k)
                elif source is section:
                    raise UsageError(f"unknown key {k!r} in config section {cmd!r}")
    given = {k: v for k, v in flags.items() if k in opts}
    settings.update(given)
    explicit |= set(given)
    for k in REQUIRED.get(cmd, ()):
        if settings.get(k) is None:
            raise UsageError(f"{cmd}: {_flag(k)} is required (flag or config file)")
    return settings, explicit


# ---------------------------------------------------------------- manifests


def git_blob_hash(data):
    """Content hash in the format git uses for blobs."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None
    inputs: dict = field(default_factory=dict)    # role -> path
    outputs: list = field(default_factory=list)
    input_hashes: dict = field(default_factory=dict)
    content_hash: str = ""

    def finalize(self):
        for role, path in self.inputs.items():
            self.input_hashes[role] = git_blob_hash(Path(path).read_bytes())
        # the output location does not affect the artifacts, so it stays out of the hash
        config = {k: v for k, v in self.config.items() if k != "out"}
        key = json.dumps({"command": self.command, "config": config, "inputs": self.input_hashes},
                         sort_keys=True).encode()
        self.content_hash = git_blob_hash(key)
        return self

    def write(self, out_dir):
        Path(out_dir, MANIFEST).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _out_dir(path):
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _inputs(settings, *roles):
    return {r: settings[r] for r in roles if settings.get(r)}


def _write_manifest(cmd, settings, out_dir, outputs, input_roles=()):
    m = RunManifest(cmd, settings, settings.get("seed"), _inputs(settings, *input_roles), sorted(outputs))
    m.finalize().write(out_dir)
    return m


# ---------------------------------------------------------------- helpers


def _read_scenes(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"scene file not found: {path}")
    scenes = io.read_scenes(path)
    if not scenes:
        raise VecGraphError(f"{path}: no scenes")
    return scenes


def _load_checkpoint(path):
    if not Path(path).is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return io.load_checkpoint(path)


def _range(text, key):
    lo, sep, hi = str(text).partition("-")
    try:
        lo = int(lo)
        hi = int(hi) if sep else lo
    except ValueError:
        raise UsageError(f"--{key.replace('_', '-')} must look like 1-3, got {text!r}") from None
    if lo < 0 or hi < lo:
        raise UsageError(f"--{key.replace('_', '-')}: bad range {text!r}")
    return lo, hi


def _checked(cls, **kw):
    try:
        return cls(**kw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _model_cfg(s):
    mask_prob = s["mask_prob"] if s["alpha"] > 0 else 0.0  # no masking when the auxiliary loss is off
    return _checked(ModelConfig, subgraph_depth=s["subgraph_depth"], global_depth=s["global_depth"], width=s["width"],
                       global_width=s["global_width"], alpha=s["alpha"], mask_prob=mask_prob,
                       coord_scale=s["coord_scale"], attention_scaled=s["attention_scaled"])


def _train_cfg(s):
    return _checked(TrainConfig, initial_lr=s["lr"], decay_factor=s["decay_factor"], decay_every=s["decay_every"],
                       epochs=s["epochs"], batch_size=s["batch_size"], seed=s["seed"],
                       val_fraction=s["val_fraction"])


def _check_context(ctx):
    if ctx not in evalkit.CONTEXTS:
        raise UsageError(f"unknown context {ctx!r}; choose from {', '.join(evalkit.CONTEXTS)}")


def _context_scenes(scenes, ctx):
    return [filter_context(s, ctx) for s in scenes]


def _fmt_report(name, rep):
    cells = [rep.de1, rep.de2, rep.de3, rep.ade]
    return f"{name:<20} " + " ".join(f"{c:7.3f}" if math.isfinite(c) else f"{'-':>7}" for c in cells)


# ---------------------------------------------------------------- commands


def cmd_generate(s, explicit=frozenset()):
    try:
        mix = scenegen.parse_mix(s["mix"])
    except ParameterError as e:
        raise UsageError(str(e)) from None
    if s["n"] < 1:
        raise UsageError("--n must be >= 1")
    if s["noise"] < 0:
        raise UsageError("--noise must be >= 0")
    scenes = scenegen.generate_dataset(s["n"], mix=mix, seed=s["seed"], noise_std=s["noise"],
                                       map_polylines=_range(s["map_polylines"], "map_polylines"),
                                       other_agents=_range(s["other_agents"], "other_agents"))
    out = _out_dir(s["out"])
    io.write_scenes(out / "scenes.jsonl", scenes)
    _write_manifest("generate", s, out, ["scenes.jsonl"])
    print(f"wrote {len(scenes)} scenes to {out / 'scenes.jsonl'}")
    return 0


# TrainConfig field -> CLI setting
_TRAIN_KEYS = {"initial_lr": "lr", "decay_factor": "decay_factor", "decay_every": "decay_every", "epochs": "epochs",
               "batch_size": "batch_size", "seed": "seed", "val_fraction": "val_fraction"}


def cmd_train(s, explicit=frozenset()):
    _check_context(s["context"])
    resume = None
    if s["resume"]:
        resume = _load_checkpoint(s["resume"])
        model_cfg = resume["model_config"]
        # the checkpoint's schedule replaces the defaults; explicit settings still win
        if resume["train_config"] is not None:
            old = resume["train_config"]
            s = {**s, **{cli: getattr(old, f) for f, cli in _TRAIN_KEYS.items() if cli not in explicit}}
    else:
        model_cfg = _model_cfg(s)
    train_cfg = _train_cfg(s)
    if resume is not None and resume["epoch"] + 1 >= train_cfg.epochs:
        raise UsageError(f"checkpoint is already at epoch {resume['epoch']}; ask for --epochs > {resume['epoch'] + 1}")

    scenes = _context_scenes(_read_scenes(s["data"]), s["context"])
    if s["val"]:
        train_set, val = scenes, _context_scenes(_read_scenes(s["val"]), s["context"])
    else:
        train_set, val = split_dataset(scenes, train_cfg.val_fraction)
    out = _out_dir(s["out"])

    def checkpoint(epoch, params, adam, history):
        io.save_checkpoint(out / "checkpoint.json", params, model_cfg, epoch, train_cfg.seed, train_cfg, adam, history)
        io.write_history(out / "history.csv", history)

    res = train(train_set, model_cfg, train_cfg, val=val, resume=resume, on_epoch_end=checkpoint)
    _write_manifest("train", s, out, ["checkpoint.json", "history.csv"], ("data", "val", "resume"))
    last = res.history[-1]
    print(f"epoch {last.epoch}: train loss {last.train_loss:.4f}, held-out ADE {last.val_ade:.3f} m")
    print(f"checkpoint: {out / 'checkpoint.json'}")
    return 0


def cmd_eval(s, explicit=frozenset()):
    _check_context(s["context"])
    ck = _load_checkpoint(s["checkpoint"])
    scenes = _context_scenes(_read_scenes(s["data"]), s["context"])
    if any(sc.future_gt is None for sc in scenes):
        raise VecGraphError(f"{s['data']}: evaluation needs future_gt on every scene")
    model = evalkit.evaluate_model(ck["params"], ck["model_config"], [normalize_scene(sc) for sc in scenes])
    cv = evalkit.evaluate_constant_velocity(scenes)
    print(f"{'Model':<20} {'DE@1s':>7} {'DE@2s':>7} {'DE@3s':>7} {'ADE':>7}")
    print("-" * 52)
    print(_fmt_report("model", model))
    print(_fmt_report("constant velocity", cv))
    print(f"scenes: {model.n_scenes}")
    if s["out"]:
        out = _out_dir(s["out"])
        doc = {"model": asdict(model), "constant_velocity": asdict(cv)}
        (out / "eval.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        _write_manifest("eval", s, out, ["eval.json"], ("checkpoint", "data"))
    return 0


def prediction_records(params, cfg, scenes, indices):
    """Absolute trajectories plus the target's attention row for each scene."""
    records = []
    for i in indices:
        sc = normalize_scene(scenes[i])
        (pred,), res = predict(params, cfg, [sc])
        target_row = [p.id for p in sc.polylines].index(sc.target_id)
        records.append({
            "index": i,
            "target_id": int(sc.target_id),
            "trajectory": pred.absolute.tolist(),
            "polyline_ids": [int(p.id) for p in sc.polylines],
            "attention": res.attention[target_row].tolist(),
        })
    return records


def cmd_predict(s, explicit=frozenset()):
    _check_context(s["context"])
    ck = _load_checkpoint(s["checkpoint"])
    scenes = _context_scenes(_read_scenes(s["data"]), s["context"])
    if s["index"] is None:
        indices = range(len(scenes))
    elif not 0 <= s["index"] < len(scenes):
        raise UsageError(f"--index {s['index']} out of range for {len(scenes)} scenes")
    else:
        indices = [s["index"]]
    doc = {"scenes": prediction_records(ck["params"], ck["model_config"], scenes, indices)}
    text = json.dumps(doc, sort_keys=True)
    if s["out"]:
        out = _out_dir(s["out"])
        (out / "prediction.json").write_text(text + "\n")
        _write_manifest("predict", s, out, ["prediction.json"], ("checkpoint", "data"))
    else:
        print(text)
    return 0


def cmd_analyze(s, explicit=frozenset()):
    cfg = ModelConfig(width=s["width"], global_width=s["global_width"], subgraph_depth=s["subgraph_depth"],
                      global_depth=s["global_depth"])
    stats = costmodel.SceneStats(s["map_polylines"], s["map_vectors"], s["agent_polylines"],
                                 s["agent_vectors"], s["n_targets"])
    rows = costmodel.flops_table(cfg, stats)
    enc = costmodel.vectornet_flops(stats, cfg)
    table = costmodel.format_flops_table(rows)
    breakdown = {
        "vector_graph": enc.to_dict(),
        "convnets": {name: {"gflops": g, "params": p} for name, g, p, _ in rows[:-1]},
    }
    print(table)
    print()
    print(json.dumps(breakdown, indent=2, sort_keys=True))
    if s["out"]:
        out = _out_dir(s["out"])
        (out / "flops.txt").write_text(table + "\n")
        (out / "breakdown.json").write_text(json.dumps(breakdown, indent=2, sort_keys=True) + "\n")
        _write_manifest("analyze", s, out, ["flops.txt", "breakdown.json"])
    return 0


# SVG colours
GREY, DARK_GREY, GREEN, TARGET, PINK, BLUE = "#9a9a9a", "#5a5a5a", "#2e9e44", "#222222", "#ff69b4", "#1f5fd6"


def _mix(hex_color, t):
    """Blend ``hex_color`` toward pure red by ``t`` in [0, 1]."""
    r, g, b = (int(hex_color[i:i + 2], 16) for i in (1, 3, 5))
    r = round(r + (255 - r) * t)
    g, b = round(g * (1 - t)), round(b * (1 - t))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(scene, trajectory=None, attention=None, size=600, margin=20):
    """One ``<path>`` per polyline; ground truth and prediction are ``<polyline>`` overlays."""
    clouds = [p.points for p in scene.polylines]
    if scene.future_gt is not None:
        clouds.append(scene.future_gt)
    if trajectory is not None:
        clouds.append(np.asarray(trajectory))
    allpts = np.vstack(clouds)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = max(float(np.max(hi - lo)), 1e-6)
    k = (size - 2 * margin) / span

    def xy(pts):
        pts = np.asarray(pts).reshape(-1, 2)
        x = margin + (pts[:, 0] - lo[0]) * k
        y = size - margin - (pts[:, 1] - lo[1]) * k
        return list(zip(x, y))

    def path_d(pts):
        c = xy(pts)
        if len(c) == 1:  # a point feature: draw a small cross so it stays visible
            x, y = c[0]
            return f"M{x - 3:.2f},{y:.2f} L{x + 3:.2f},{y:.2f} M{x:.2f},{y - 3:.2f} L{x:.2f},{y + 3:.2f}"
        return "M" + " L".join(f"{x:.2f},{y:.2f}" for x, y in c)

    weights = None
    if attention is not None:
        a = np.asarray(attention, dtype=np.float64)
        if len(a) != len(scene.polylines):
            raise VecGraphError(f"attention has {len(a)} entries for {len(scene.polylines)} polylines")
        weights = a / a.max() if a.max() > 0 else a

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>']
    for row, p in enumerate(scene.polylines):
        if p.id == scene.target_id:
            base, width = TARGET, 2.5
        elif p.kind == "agent_trajectory":
            base, width = GREEN, 2.0
        elif p.kind == "lane_boundary":
            base, width = GREY, 1.5
        else:
            base, width = DARK_GREY, 1.5
        color = base if weights is None else _mix(base, float(weights[row]))
        extra = "" if weights is None else f' data-attention="{float(attention[row]):.6g}"'
        out.append(f'<path d="{path_d(p.points)}" fill="none" stroke="{color}" stroke-width="{width}" '
                   f'data-polyline-id="{p.id}" data-kind="{p.kind}"{extra}/>')
    if scene.future_gt is not None:
        pts = np.vstack([scene.last_observed[None], scene.future_gt])
        out.append(f'<polyline points="{" ".join(f"{x:.2f},{y:.2f}" for x, y in xy(pts))}" fill="none" '
                   f'stroke="{PINK}" stroke-width="2" class="ground-truth"/>')
    if trajectory is not None:
        pts = np.vstack([scene.last_observed[None], np.asarray(trajectory)])
        out.append(f'<polyline points="{" ".join(f"{x:.2f},{y:.2f}" for x, y in xy(pts))}" fill="none" '
                   f'stroke="{BLUE}" stroke-width="2" class="prediction"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_render(s, explicit=frozenset()):
    scenes = _read_scenes(s["data"])
    if not 0 <= s["index"] < len(scenes):
        raise UsageError(f"--index {s['index']} out of range for {len(scenes)} scenes")
    if s["prediction"] and s["checkpoint"]:
        raise UsageError("give --prediction or --checkpoint, not both")
    scene = scenes[s["index"]]
    traj = attn = None
    if s["checkpoint"]:
        ck = _load_checkpoint(s["checkpoint"])
        (rec,) = prediction_records(ck["params"], ck["model_config"], scenes, [s["index"]])
        traj, attn = rec["trajectory"], rec["attention"]
    elif s["prediction"]:
        if not Path(s["prediction"]).is_file():
            raise FileNotFoundError(f"prediction file not found: {s['prediction']}")
        recs = [r for r in json.loads(Path(s["prediction"]).read_text())["scenes"] if r["index"] == s["index"]]
        if not recs:
            raise VecGraphError(f"{s['prediction']} has no prediction for scene {s['index']}")
        traj = recs[0]["trajectory"]
        # the prediction may come from a context-filtered scene; map weights back by polyline id
        by_id = dict(zip(recs[0]["polyline_ids"], recs[0]["attention"]))
        attn = [by_id.get(p.id, 0.0) for p in scene.polylines]
    out = _out_dir(s["out"])
    (out / "scene.svg").write_text(render_svg(scene, traj, attn))
    _write_manifest("render", s, out, ["scene.svg"], ("data", "prediction", "checkpoint"))
    print(f"wrote {out / 'scene.svg'}")
    return 0


def cmd_ablate(s, explicit=frozenset()):
    contexts = [c.strip() for c in s["contexts"].split(",") if c.strip()]
    for c in contexts:
        _check_context(c)
    nc = {"yes": [True], "no": [False], "both": [False, True]}.get(s["node_completion"])
    if nc is None or not contexts:
        raise UsageError("--node-completion takes yes, no or both and --contexts needs at least one arm")
    arms = [evalkit.Arm(c, flag) for c in contexts for flag in nc]
    model_cfg = _model_cfg(s)
    train_cfg = _train_cfg(s)
    scenes = _read_scenes(s["data"])
    if s["val"]:
        train_set, val = scenes, _read_scenes(s["val"])
    else:
        train_set, val = split_dataset(scenes, train_cfg.val_fraction)
    rows = evalkit.ablate(train_set, val, arms, model_cfg, train_cfg)
    table = evalkit.format_table(rows)
    cv = evalkit.evaluate_constant_velocity(val)
    out = _out_dir(s["out"])
    (out / "ablation.csv").write_text(evalkit.ablation_csv(rows))
    (out / "table.txt").write_text(table + "\n")
    _write_manifest("ablate", s, out, ["ablation.csv", "table.txt"], ("data", "val"))
    print(table)
    print(f"constant velocity ADE {cv.ade:.3f} m on {cv.n_scenes} held-out scenes")
    return 0


HANDLERS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "analyze": cmd_analyze,
    "render": cmd_render,
    "ablate": cmd_ablate,
}


def _limit_threads():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return None
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # argparse: 0 for --help, 2 for bad usage
        return e.code if isinstance(e.code, int) else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        limiter = _limit_threads()
        settings, explicit = resolve_settings(args.command, flags, args.config)
        try:
            return HANDLERS[args.command](settings, explicit)
        finally:
            if limiter is not None:
                limiter.restore_original_limits()
    except UsageError as e:
        print(f"vecgraph {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as e:
        print(f"vecgraph {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
