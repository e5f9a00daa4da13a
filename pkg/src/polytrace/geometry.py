"""Polygon value types and the elementary ring operations.

Coordinates are pixel-space ``(x, y)`` with the y-axis pointing down, as in
image arrays. A ring is "counter-clockwise" when its shoelace area is
positive in that frame; exteriors are stored that way and holes the other
way round.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import PolytraceError

__all__ = [
    "Ring",
    "PolygonWithHoles",
    "as_points",
    "signed_area",
    "dp_simplify",
    "resample_ring",
    "interior_angles",
    "point_segment_distances",
]


def as_points(ring) -> np.ndarray:
    """Return the ``(n, 2)`` float array behind a Ring or any point sequence."""
    if isinstance(ring, Ring):
        return ring.points
    pts = np.asarray(ring, dtype=np.float64)
    if pts.size == 0:
        return pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise PolytraceError("degenerate-ring", f"expected (n, 2) points, got shape {pts.shape}")
    return pts


class Ring:
    """Closed sequence of 2D points; the first point is not repeated at the end.

    Construction checks length >= 3, finiteness and that no two cyclically
    consecutive points coincide. Simplicity is not enforced: traced masks can
    legitimately touch themselves at a pinch vertex.
    """

    __slots__ = ("_points",)

    def __init__(self, points: Iterable[Sequence[float]] | np.ndarray):
        pts = np.array(as_points(points) if not isinstance(points, Ring) else points.points,
                       dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise PolytraceError("degenerate-ring", f"a ring needs at least 3 points, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise PolytraceError("degenerate-ring", "non-finite coordinate")
        if np.any(np.all(pts == np.roll(pts, -1, axis=0), axis=1)):
            raise PolytraceError("degenerate-ring", "consecutive points coincide")
        pts.flags.writeable = False
        self._points = pts

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return len(self._points)

    def __iter__(self):
        return iter(map(tuple, self._points.tolist()))

    def __array__(self, dtype=None, copy=None):
        return self._points if dtype is None else self._points.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Ring):
            return NotImplemented
        return self._points.shape == other._points.shape and bool(np.all(self._points == other._points))

    def __hash__(self) -> int:
        return hash(self._points.tobytes())

    def __repr__(self) -> str:
        return f"Ring({self._points.tolist()!r})"

    @property
    def area(self) -> float:
        return signed_area(self)

    def reversed(self) -> "Ring":
        return Ring(self._points[::-1])

    def bounds(self) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)``."""
        lo = self._points.min(axis=0)
        hi = self._points.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def translated(self, dx: float, dy: float) -> "Ring":
        return Ring(self._points + np.array([dx, dy]))

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges touch or cross (O(n^2))."""
        p = self._points
        n = len(p)
        a = p
        b = np.roll(p, -1, axis=0)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_touch(a[i], b[i], a[j], b[j]):
                    return False
        return True


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _on_segment(p, q, r) -> bool:
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def _segments_touch(p1, p2, p3, p4) -> bool:
    d1 = _orient(p3, p4, p1)
    d2 = _orient(p3, p4, p2)
    d3 = _orient(p1, p2, p3)
    d4 = _orient(p1, p2, p4)
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return ((d1 == 0 and _on_segment(p3, p1, p4)) or (d2 == 0 and _on_segment(p3, p2, p4))
            or (d3 == 0 and _on_segment(p1, p3, p2)) or (d4 == 0 and _on_segment(p1, p4, p2)))


class PolygonWithHoles:
    """Exterior ring (positive area) plus hole rings (negative area).

    Orientation is normalised on construction, so callers may pass rings in
    either winding.
    """

    __slots__ = ("exterior", "holes")

    def __init__(self, exterior, holes: Iterable = ()):
        ext = exterior if isinstance(exterior, Ring) else Ring(exterior)
        if signed_area(ext) < 0:
            ext = ext.reversed()
        xmin, ymin, xmax, ymax = ext.bounds()
        hs = []
        for h in holes:
            h = h if isinstance(h, Ring) else Ring(h)
            if signed_area(h) > 0:
                h = h.reversed()
            hx0, hy0, hx1, hy1 = h.bounds()
            if hx0 < xmin or hy0 < ymin or hx1 > xmax or hy1 > ymax:
                raise PolytraceError("hole-outside", "hole ring leaves the exterior bounding box")
            hs.append(h)
        self.exterior: Ring = ext
        self.holes: tuple[Ring, ...] = tuple(hs)

    @property
    def rings(self) -> tuple[Ring, ...]:
        return (self.exterior, *self.holes)

    @property
    def area(self) -> float:
        return sum(signed_area(r) for r in self.rings)

    @property
    def vertex_count(self) -> int:
        return sum(len(r) for r in self.rings)

    def bounds(self) -> tuple[float, float, float, float]:
        return self.exterior.bounds()

    def translated(self, dx: float, dy: float) -> "PolygonWithHoles":
        return PolygonWithHoles(self.exterior.translated(dx, dy), [h.translated(dx, dy) for h in self.holes])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolygonWithHoles):
            return NotImplemented
        return self.exterior == other.exterior and self.holes == other.holes

    def __repr__(self) -> str:
        return f"PolygonWithHoles({self.exterior!r}, holes={list(self.holes)!r})"


def signed_area(ring) -> float:
    """Shoelace area, positive for counter-clockwise rings."""
    p = as_points(ring)
    if len(p) < 3:
        return 0.0
    # shift to the first vertex: smaller products, still exact on integer rings
    x = p[:, 0] - p[0, 0]
    y = p[:, 1] - p[0, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def point_segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each of ``points`` to the segment ``a``-``b``.

    A zero-length segment degrades to point distance.
    """
    d = b - a
    dd = float(d @ d)
    w = points - a
    if dd == 0.0:
        return np.hypot(w[:, 0], w[:, 1])
    t = np.clip((w @ d) / dd, 0.0, 1.0)
    proj = w - t[:, None] * d
    return np.hypot(proj[:, 0], proj[:, 1])


def _dp_open(seq: np.ndarray, epsilon: float) -> np.ndarray:
    keep = np.zeros(len(seq), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(seq) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = point_segment_distances(seq[i + 1:j], seq[i], seq[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            k += i + 1
            keep[k] = True
            stack.append((k, j))
            stack.append((i, k))
    return keep


def _distinct_count(pts: np.ndarray, limit: int = 3) -> int:
    seen = set()
    for p in map(tuple, pts.tolist()):
        seen.add(p)
        if len(seen) >= limit:
            break
    return len(seen)


def _triangle_floor(pts: np.ndarray, anchor: int) -> list[int]:
    a = pts[anchor]
    da = np.hypot(*(pts - a).T)
    b = int(np.argmax(da))
    ab = pts[b] - a
    dev = np.abs(ab[0] * (pts[:, 1] - a[1]) - ab[1] * (pts[:, 0] - a[0])) / np.hypot(*ab)
    usable = np.any(pts != a, axis=1) & np.any(pts != pts[b], axis=1)
    if not usable.any():
        raise PolytraceError("degenerate-ring", "fewer than 3 distinct points")
    if dev[usable].max() > 0:
        score = np.where(usable, dev, -1.0)
    else:
        score = np.where(usable, np.minimum(da, np.hypot(*(pts - pts[b]).T)), -1.0)
    c = int(np.argmax(score))
    return sorted({anchor, b, c})


def dp_simplify(ring, epsilon: float) -> Ring:
    """Douglas-Peucker simplification of a closed ring.

    The ring is opened at its lexicographically smallest point (a convex hull
    vertex, so never a candidate for removal), simplified as an open chain
    that ends back at that anchor, and returned in the input's cyclic order.
    Output is never below 3 points; if the tolerance would collapse the ring,
    the anchor, the point farthest from it and the point farthest from that
    chord are kept.
    """
    pts = as_points(ring)
    n = len(pts)
    if n < 3 or _distinct_count(pts) < 3:
        raise PolytraceError("degenerate-ring", "ring needs 3 distinct points")
    if not epsilon >= 0:
        raise PolytraceError("invalid-tolerance", f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0:
        return ring if isinstance(ring, Ring) else Ring(pts)

    anchor = int(np.lexsort((pts[:, 1], pts[:, 0]))[0])
    order = np.concatenate([np.arange(anchor, n), np.arange(0, anchor), [anchor]])
    keep = _dp_open(pts[order], epsilon)
    idx = sorted(set(order[keep].tolist()))

    # a self-touching ring can leave the same coordinate twice in a row
    out = []
    for i in idx:
        if not out or np.any(pts[i] != pts[out[-1]]):
            out.append(i)
    while len(out) > 1 and np.all(pts[out[-1]] == pts[out[0]]):
        out.pop()
    if len(out) < 3:
        out = _triangle_floor(pts, anchor)
    return Ring(pts[out])


def resample_ring(ring, interval: float) -> tuple[Ring, np.ndarray]:
    """Insert points every ``interval`` px along each edge.

    Returns the resampled ring and a boolean array flagging the original
    (seed) vertices. An edge whose length is an exact multiple of the
    interval does not emit the point that would land on its end vertex.
    """
    if not interval > 0:
        raise PolytraceError("invalid-interval", f"interval must be > 0, got {interval}")
    pts = as_points(ring)
    nxt = np.roll(pts, -1, axis=0)
    vec = nxt - pts
    q = np.hypot(vec[:, 0], vec[:, 1])
    ratio = q / interval
    k = np.floor(ratio).astype(np.int64)
    exact = np.abs(ratio - np.round(ratio)) <= 1e-9
    k = np.where(exact, np.round(ratio).astype(np.int64) - 1, k)
    k = np.maximum(k, 0)

    counts = k + 1
    total = int(counts.sum())
    edge = np.repeat(np.arange(len(pts)), counts)
    starts = np.cumsum(counts) - counts
    step = np.arange(total) - starts[edge]
    unit = vec / np.where(q > 0, q, 1.0)[:, None]
    out = pts[edge] + (step * interval)[:, None] * unit[edge]
    out[starts] = pts  # seed coordinates bit-exact
    seeds = np.zeros(total, dtype=bool)
    seeds[starts] = True
    return Ring(out), seeds


def interior_angles(ring, s: int = 1) -> np.ndarray:
    """Angle at each point between the rays to its ``s``-th neighbours.

    Indices wrap around the ring. A straight run gives pi; a degenerate
    (zero-length) ray is also reported as pi.
    """
    pts = as_points(ring)
    n = len(pts)
    if s < 1 or n < 2 * s + 1:
        raise PolytraceError("insufficient-points", f"need at least {2 * s + 1} points for s={s}, got {n}")
    u = np.roll(pts, s, axis=0) - pts
    v = np.roll(pts, -s, axis=0) - pts
    cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
    dot = u[:, 0] * v[:, 0] + u[:, 1] * v[:, 1]
    theta = np.arctan2(np.abs(cross), dot)
    degenerate = (np.all(u == 0, axis=1)) | (np.all(v == 0, axis=1))
    theta[degenerate] = np.pi
    return theta
