"""PoLiS: symmetric mean vertex-to-boundary distance between two polygons."""

from __future__ import annotations

import numpy as np

from ..errors import PolytraceError
from ..geometry import as_points


def boundary_distances(points: np.ndarray, ring: np.ndarray, chunk: int = 1 << 20) -> np.ndarray:
    """Distance from each point to the nearest segment of the closed ``ring``."""
    a = ring
    d = np.roll(ring, -1, axis=0) - ring
    dd = (d * d).sum(axis=1)
    safe = np.where(dd > 0, dd, 1.0)
    out = np.empty(len(points))
    step = max(1, chunk // max(len(ring), 1))
    for s in range(0, len(points), step):
        w = points[s:s + step, None, :] - a[None, :, :]
        t = np.clip((w * d[None]).sum(axis=2) / safe, 0.0, 1.0)
        t[:, dd == 0] = 0.0
        proj = w - t[..., None] * d[None]
        out[s:s + step] = np.sqrt((proj * proj).sum(axis=2)).min(axis=1)
    return out


def polis(A, B) -> float:
    a = as_points(A)
    b = as_points(B)
    if len(a) < 3 or len(b) < 3:
        raise PolytraceError("degenerate-ring", "PoLiS needs rings of at least 3 points")
    return float(boundary_distances(a, b).sum() / (2 * len(a)) + boundary_distances(b, a).sum() / (2 * len(b)))
