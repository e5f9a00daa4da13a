import numpy as np
import pytest


def random_rectilinear(rng, min_edge=32, max_cols=4, margin=8, spread=None):
    """x-monotone rectilinear polygon with every edge >= ``min_edge``.

    Built from vertical strips whose tops and bottoms step by at least
    ``min_edge`` between neighbours; optionally transposed. Integer vertices.
    """
    spread = spread or 2 * min_edge
    while True:
        k = int(rng.integers(1, max_cols + 1))
        widths = rng.integers(min_edge, min_edge + spread, size=k)
        xs = np.concatenate([[0], np.cumsum(widths)])
        top = [0]
        bot = [int(rng.integers(3 * min_edge, 3 * min_edge + spread))]
        ok = True
        for _ in range(1, k):
            t = top[-1] + int(rng.choice([-1, 1]) * rng.integers(min_edge, min_edge + spread))
            b = bot[-1] + int(rng.choice([-1, 1]) * rng.integers(min_edge, min_edge + spread))
            if b - t < min_edge or min(b, bot[-1]) - max(t, top[-1]) < min_edge:
                ok = False
                break
            top.append(t)
            bot.append(b)
        if ok:
            break
    pts = []
    for i in range(k):
        pts += [(xs[i], top[i]), (xs[i + 1], top[i])]
    for i in reversed(range(k)):
        pts += [(xs[i + 1], bot[i]), (xs[i], bot[i])]
    # merge the duplicated corners between strips
    out = []
    for p in pts:
        if not out or out[-1] != p:
            out.append(p)
    pts = np.array(out, dtype=np.float64)
    pts -= pts.min(axis=0) - margin
    if rng.random() < 0.5:
        pts = pts[:, ::-1].copy()
    return pts


def noisy_square(rng, n=200, side=100.0, noise=1.5):
    """Points walked around a square with perpendicular jitter."""
    t = np.sort(rng.uniform(0, 4, size=n))
    pts = []
    for v in t:
        e, f = int(v), v - int(v)
        base = [(f * side, 0.0), (side, f * side), (side - f * side, side), (0.0, side - f * side)][e]
        nrm = [(0, -1), (1, 0), (0, 1), (-1, 0)][e]
        j = rng.uniform(-noise, noise)
        pts.append((base[0] + j * nrm[0], base[1] + j * nrm[1]))
    pts = np.array(pts)
    keep = np.any(pts != np.roll(pts, -1, axis=0), axis=1)
    return pts[keep]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
