"""Contour reconstruction and one-to-one alignment with ground-truth polygons.

Prediction only needs :func:`reconstruct`. Training labels come from
:func:`match_to_ground_truth`, which pairs every reconstructed point with a
point on the ground-truth outline so the two sequences have equal length.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .contours import Region, crop_iou, iter_regions, polygon_pixels, trace_region
from .errors import PolytraceError
from .geometry import PolygonWithHoles, Ring, as_points, dp_simplify, resample_ring, signed_area

log = logging.getLogger(__name__)

__all__ = [
    "MatchedSample",
    "LabelBatch",
    "reconstruct",
    "nearest_indices",
    "match_to_ground_truth",
    "make_training_labels",
]


@dataclass(frozen=True)
class MatchedSample:
    """Aligned training sample.

    ``G_prime[i]`` is the ground-truth target for ``R[i]``; ``C[i]`` is 1
    where ``R[i]`` was matched to a ground-truth vertex.
    """

    R: Ring
    G_prime: np.ndarray
    C: np.ndarray
    P: int
    crossing: bool = False
    class_id: int = 0
    instance_id: int = 0
    ring: int = 0  # 0 = exterior, k = k-th hole

    @property
    def offsets(self) -> np.ndarray:
        """Regression targets ``G_prime - R``."""
        return self.G_prime - self.R.points


@dataclass
class LabelBatch:
    samples: list[MatchedSample] = field(default_factory=list)
    skipped: int = 0
    crossings: int = 0


def reconstruct(contour, epsilon: float = defaults.EPSILON, interval: float = defaults.INTERVAL) -> Ring:
    """Simplify a dense contour, then resample it at a fixed spacing."""
    ring, _ = resample_ring(dp_simplify(contour, epsilon), interval)
    return ring


def nearest_indices(points: np.ndarray, queries: np.ndarray, chunk: int = 1 << 20) -> np.ndarray:
    """Index of the nearest point for each query; ties go to the lowest index."""
    out = np.empty(len(queries), dtype=np.int64)
    step = max(1, chunk // max(len(points), 1))
    for s in range(0, len(queries), step):
        q = queries[s:s + step]
        d2 = ((q[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
        out[s:s + step] = np.argmin(d2, axis=1)
    return out


def match_to_ground_truth(R, G) -> MatchedSample:
    """Label the points of ``R`` nearest to each vertex of ``G`` and build ``G'``.

    Several ground-truth vertices landing on the same point collapse onto the
    first of them (in ``G`` order). Matched vertices are walked in ``R``
    order; between consecutive ones the ground-truth edge is split evenly
    into as many points as ``R`` has in that gap. A match order that is not
    a rotation of ``G``'s own order is flagged as ``crossing``.
    """
    r = as_points(R)
    g = as_points(G)
    if len(r) == 0 or len(g) == 0:
        raise PolytraceError("empty-polygon", "R and G must both be non-empty")
    if len(r) < 3 or len(g) < 3:
        raise PolytraceError("degenerate-ring", "R and G need at least 3 points")
    if signed_area(g) * signed_area(r) < 0:
        g = g[::-1]

    nearest = nearest_indices(r, g)
    idx, first_j = np.unique(nearest, return_index=True)  # sorted by position in R
    P = len(idx)
    N = len(r)

    seq = np.roll(first_j, -int(np.argmin(first_j)))
    crossing = bool(np.any(np.diff(seq) <= 0))

    verts = g[first_j]
    nxt = np.roll(idx, -1)
    nxt[-1] += N
    gap = nxt - idx  # n_k + 1
    k = np.repeat(np.arange(P), gap)
    m = np.arange(N) - np.repeat(np.cumsum(gap) - gap, gap)
    a = verts[k]
    b = verts[(k + 1) % P]
    pts = a + (m / gap[k])[:, None] * (b - a)
    gp = np.empty((N, 2))
    gp[(idx[k] + m) % N] = pts

    C = np.zeros(N, dtype=np.int8)
    C[idx] = 1
    ring = R if isinstance(R, Ring) else Ring(r)
    if crossing:
        log.warning("ground-truth vertices matched out of cyclic order")
    return MatchedSample(ring, gp, C, P, crossing)


def _ring_pixels(ring):
    return polygon_pixels(ring)


def _best_pair(target, candidates) -> tuple[int, float]:
    best, best_iou = -1, 0.0
    for j, cand in candidates:
        iou = crop_iou(target, cand)
        if iou > best_iou:
            best, best_iou = j, iou
    return best, best_iou


def _bbox(px) -> tuple[int, int, int, int]:
    crop, r0, c0 = px
    return r0, c0, r0 + crop.shape[0], c0 + crop.shape[1]


def _overlapping(box, boxes: np.ndarray) -> np.ndarray:
    if len(boxes) == 0:
        return np.zeros(0, dtype=np.int64)
    r0, c0, r1, c1 = box
    hit = (boxes[:, 0] < r1) & (boxes[:, 2] > r0) & (boxes[:, 1] < c1) & (boxes[:, 3] > c0)
    return np.nonzero(hit)[0]


def _sample(contour_ring, gt_ring, epsilon, interval, **meta) -> MatchedSample:
    s = match_to_ground_truth(reconstruct(contour_ring, epsilon, interval), gt_ring)
    return MatchedSample(s.R, s.G_prime, s.C, s.P, s.crossing, **meta)


def make_training_labels(mask, gt, epsilon: float = defaults.EPSILON, interval: float = defaults.INTERVAL,
                         connectivity: int = 8, min_iou: float = defaults.PAIR_IOU) -> LabelBatch:
    """Pair each traced region with a ground-truth polygon and align them.

    A region is paired with the polygon of highest mask IoU, which must reach
    ``min_iou``; holes pair with holes the same way. Anything left unpaired
    is counted in ``skipped`` rather than raising.
    """
    gt = [p if isinstance(p, PolygonWithHoles) else PolygonWithHoles(p) for p in gt]
    if not gt:
        raise PolytraceError("empty-polygon", "ground truth is empty")
    gt_px = [polygon_pixels(p) for p in gt]
    gt_boxes = np.array([_bbox(px) for px in gt_px])

    batch = LabelBatch()
    reg: Region
    for reg in iter_regions(mask, connectivity):
        rings = trace_region(reg.pixels, connectivity)
        offset = np.array([reg.col0, reg.row0])
        rings = [r + offset for r in rings]
        ext = [r for r in rings if signed_area(r) > 0][0]
        holes = [r for r in rings if signed_area(r) < 0]

        target = (reg.pixels, reg.row0, reg.col0)
        cands = _overlapping(_bbox(target), gt_boxes)
        j, iou = _best_pair(target, [(int(c), gt_px[c]) for c in cands])
        if j < 0 or iou < min_iou:
            batch.skipped += 1 + len(holes)
            continue
        meta = dict(class_id=reg.class_id, instance_id=reg.region_id)
        batch.samples.append(_sample(ext, gt[j].exterior, epsilon, interval, ring=0, **meta))

        gt_holes = [(h, _ring_pixels(h)) for h in gt[j].holes]
        for k, hole in enumerate(holes, start=1):
            hpx = _ring_pixels(Ring(hole))
            hj, hiou = _best_pair(hpx, [(i, px) for i, (_, px) in enumerate(gt_holes)])
            if hj < 0 or hiou < min_iou:
                batch.skipped += 1
                continue
            batch.samples.append(_sample(hole, gt_holes[hj][0], epsilon, interval, ring=k, **meta))

    batch.crossings = sum(s.crossing for s in batch.samples)
    if batch.skipped:
        log.warning("%d contour ring(s) had no ground-truth partner", batch.skipped)
    return batch
