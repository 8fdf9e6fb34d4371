"""Independent oracles shared by the test modules."""

import numpy as np


def numgrad(f, x, eps=1e-5):
    """Central finite differences of the scalar ``f()`` w.r.t. array ``x`` (mutated in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + eps
        fp = f()
        x[i] = old - eps
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * eps)
    return g


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b)) / scale)


def arc_length_walker(points, interval):
    """Walk a polyline segment by segment, emitting a point every ``interval`` metres plus the end."""
    pts = [np.asarray(p, dtype=float) for p in points]
    out = [pts[0]]
    carry = 0.0  # distance walked since the last emitted sample
    for a, b in zip(pts[:-1], pts[1:]):
        seg = float(np.hypot(*(b - a)))
        pos = 0.0
        while seg - pos >= interval - carry - 1e-12:
            pos += interval - carry
            carry = 0.0
            out.append(a + (b - a) * (pos / seg))
        carry += seg - pos
    if np.linalg.norm(out[-1] - pts[-1]) > 1e-9:
        out.append(pts[-1])
    return np.array(out)
