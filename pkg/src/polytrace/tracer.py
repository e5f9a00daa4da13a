"""Sequence tracing: refine reconstructed contours and pick their vertices.

A :class:`Scorer` supplies per-point offsets and vertex probabilities. The
built-in :class:`RuleScorer` needs no model: it never moves points and
scores them by how sharp the local angle is. :class:`FileScorer` replays
scores produced elsewhere.
"""

from __future__ import annotations

import logging
import math
import os
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import islice

import numpy as np

from . import defaults
from .contours import Region, iter_regions, trace_region
from .errors import PolytraceError
from .geometry import PolygonWithHoles, Ring, as_points, interior_angles, signed_area
from .reform import reconstruct

log = logging.getLogger(__name__)

MIN_SCORED_POINTS = 7


@dataclass(frozen=True)
class PointScores:
    """``offsets`` has shape ``(iterations, n, 2)``; ``vertex_prob`` shape ``(n,)``."""

    offsets: np.ndarray
    vertex_prob: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.float64)
        if off.ndim == 2:
            off = off[None]
        prob = np.asarray(self.vertex_prob, dtype=np.float64)
        if off.ndim != 3 or off.shape[2] != 2 or (off.shape[0] and off.shape[1] != len(prob)):
            raise PolytraceError("offset-shape", f"offsets {off.shape} do not fit {len(prob)} points")
        if not np.all(np.isfinite(off)):
            raise PolytraceError("offset-shape", "non-finite offset")
        if np.any(~(prob >= 0) | ~(prob <= 1)):
            raise PolytraceError("invalid-probability", "vertex probabilities must lie in [0, 1]")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "vertex_prob", prob)

    def __len__(self) -> int:
        return len(self.vertex_prob)


@dataclass(frozen=True)
class AngleFeatures:
    """Interior angles at neighbour distances 1, 2 and 3, shape ``(n, 3)``."""

    theta: np.ndarray

    @property
    def polar(self) -> np.ndarray:
        """``(cos, sin)`` pair per angle, shape ``(n, 6)``."""
        return np.stack([np.cos(self.theta), np.sin(self.theta)], axis=2).reshape(len(self.theta), 6)


@dataclass(frozen=True)
class ScoreContext:
    instance_id: int
    ring: int = 0
    class_id: int = 0
    iteration: int = 0  # offset pass index; equals the pass count on the final scoring call
    image: object = None


class Scorer(ABC):
    """Per-point offset and vertex-probability provider.

    Implementations that cannot run in several worker processes at once set
    ``parallel_safe = False``; the pipeline then scores serially.
    """

    parallel_safe = True

    @abstractmethod
    def score(self, ring: Ring, features: AngleFeatures, context: ScoreContext) -> PointScores:
        """Return one offset iteration and the vertex probabilities for ``ring``."""


@dataclass(frozen=True)
class TracedPolygon:
    polygon: PolygonWithHoles
    vertex_conf: tuple[np.ndarray, ...]  # one array per ring, exterior first
    class_id: int = 0
    instance_id: int = 0

    @property
    def instance_score(self) -> float:
        return float(np.concatenate(self.vertex_conf).mean())


@dataclass(frozen=True)
class TraceParams:
    epsilon: float = defaults.EPSILON
    interval: float = defaults.INTERVAL
    k_iters: int = defaults.OFFSET_ITERS
    prob_threshold: float = defaults.PROB_THRESHOLD
    connectivity: int = 8


@dataclass
class TraceResult:
    polygons: list[TracedPolygon] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)


def apply_offsets(R, offsets, k_iters: int) -> Ring:
    """Add ``k_iters`` rounds of per-point offsets in sequence.

    Points that land on their successor are nudged 1e-6 px apart in x.
    """
    pts = np.array(as_points(R), dtype=np.float64)
    off = np.asarray(offsets, dtype=np.float64)
    if k_iters < 0:
        raise PolytraceError("offset-shape", "k_iters must be >= 0")
    if off.ndim == 2:
        off = off[None]
    if k_iters and (off.ndim != 3 or off.shape[0] < k_iters or off.shape[1:] != pts.shape):
        raise PolytraceError("offset-shape", f"offsets {off.shape} do not fit {k_iters} x {pts.shape}")
    for k in range(k_iters):
        pts = pts + off[k]
        for _ in range(len(pts)):
            dup = np.all(pts == np.roll(pts, -1, axis=0), axis=1)
            if not dup.any():
                break
            i = (np.nonzero(dup)[0][0] + 1) % len(pts)
            pts[i, 0] += 1e-6
    return Ring(pts)


def angle_feature_block(R) -> AngleFeatures:
    pts = as_points(R)
    if len(pts) < MIN_SCORED_POINTS:
        raise PolytraceError("insufficient-points", f"need {MIN_SCORED_POINTS} points, got {len(pts)}")
    return AngleFeatures(np.stack([interior_angles(pts, s) for s in (1, 2, 3)], axis=1))


def angle_probability(theta, theta_threshold: float = defaults.ANGLE_THRESHOLD) -> np.ndarray:
    """Piecewise-linear map from angle to vertex probability; 0.5 at the threshold, 0 at pi."""
    theta = np.asarray(theta, dtype=np.float64)
    below = (theta_threshold - theta) / theta_threshold * 0.5 + 0.5
    above = 0.5 - (theta - theta_threshold) / (math.pi - theta_threshold) * 0.5
    return np.clip(np.where(theta < theta_threshold, below, above), 0.0, 1.0)


def rule_based_scores(R, theta_threshold: float = defaults.ANGLE_THRESHOLD) -> PointScores:
    theta = angle_feature_block(R).theta[:, 0]
    return PointScores(np.zeros((1, len(theta), 2)), angle_probability(theta, theta_threshold))


class RuleScorer(Scorer):
    def __init__(self, theta_threshold: float = defaults.ANGLE_THRESHOLD):
        self.theta_threshold = theta_threshold

    def score(self, ring, features, context):
        prob = angle_probability(features.theta[:, 0], self.theta_threshold)
        return PointScores(np.zeros((1, len(prob), 2)), prob)


class FileScorer(Scorer):
    """Replays records loaded from a score-interchange file.

    ``records`` maps ``(instance_id, ring)`` to a :class:`PointScores` whose
    ``offsets`` hold one row per refinement pass. Passes beyond those
    supplied get zero offsets.
    """

    def __init__(self, records: dict[tuple[int, int], PointScores]):
        self.records = records

    def score(self, ring, features, context):
        key = (context.instance_id, context.ring)
        if key not in self.records:
            raise PolytraceError("missing-scores", f"no scores for instance {key[0]} ring {key[1]}")
        rec = self.records[key]
        n = len(ring)
        if len(rec) != n:
            raise PolytraceError("offset-shape", f"instance {key[0]} ring {key[1]}: {len(rec)} scores for {n} points")
        it = context.iteration
        off = rec.offsets[it] if it < len(rec.offsets) else np.zeros((n, 2))
        return PointScores(off[None], rec.vertex_prob)


def select_vertices(R, scores: PointScores, prob_threshold: float = defaults.PROB_THRESHOLD) -> TracedPolygon:
    """Decode vertex probabilities into a polygon.

    Points at or above the threshold form cyclic runs; each run keeps its
    most probable point (first on ties). Fewer than 3 survivors fall back to
    the three most probable points.
    """
    ring, conf = _decode(R, scores, prob_threshold)
    poly = PolygonWithHoles(ring)
    if poly.exterior is not ring:
        conf = conf[::-1]
    return TracedPolygon(poly, (conf,))


def _decode(R, scores: PointScores, prob_threshold: float) -> tuple[Ring, np.ndarray]:
    pts = as_points(R)
    prob = np.asarray(scores.vertex_prob, dtype=np.float64)
    if len(prob) != len(pts):
        raise PolytraceError("offset-shape", f"{len(prob)} scores for {len(pts)} points")
    n = len(pts)
    above = prob >= prob_threshold
    keep: list[int] = []
    if above.any() and not above.all():
        start = int(np.nonzero(~above)[0][0])  # begin just after a gap so no run wraps
        run: list[int] = []
        for j in range(1, n + 1):
            i = (start + j) % n
            if above[i]:
                run.append(i)
            elif run:
                keep.append(min(run, key=lambda t: (-prob[t], t)))
                run = []
        if run:
            keep.append(min(run, key=lambda t: (-prob[t], t)))
    elif above.all():
        keep.append(int(np.argmax(prob)))
    keep = sorted(keep)
    if len(keep) < 3:
        keep = sorted(np.argsort(-prob, kind="stable")[:3].tolist())
    return Ring(pts[keep]), prob[keep]


def _trace_ring(contour, scorer: Scorer, params: TraceParams, ctx: ScoreContext):
    R = reconstruct(contour, params.epsilon, params.interval)
    if len(R) < MIN_SCORED_POINTS:
        # too few points for angle features: keep the reconstruction as is
        return R, angle_probability(interior_angles(R, 1))
    for it in range(params.k_iters):
        s = scorer.score(R, angle_feature_block(R), replace(ctx, iteration=it))
        R = apply_offsets(R, s.offsets[:1], 1)
    s = scorer.score(R, angle_feature_block(R), replace(ctx, iteration=params.k_iters))
    return _decode(R, s, params.prob_threshold)


def trace_region_polygon(region: Region, scorer: Scorer, params: TraceParams) -> TracedPolygon:
    rings = trace_region(region.pixels, params.connectivity, dense=False)
    offset = np.array([region.col0, region.row0])
    rings = [r + offset for r in rings]
    ordered = sorted(rings, key=lambda r: signed_area(r) < 0)  # exterior first
    out, conf = [], []
    for k, ring in enumerate(ordered):
        ctx = ScoreContext(region.region_id, k, region.class_id)
        r, c = _trace_ring(ring, scorer, params, ctx)
        out.append(r)
        conf.append(c)
    poly = PolygonWithHoles(out[0], out[1:])
    # orientation normalisation may have reversed a ring
    conf = [c if (signed_area(r) > 0) == (signed_area(p) > 0) else c[::-1]
            for c, r, p in zip(conf, out, poly.rings)]
    return TracedPolygon(poly, tuple(conf), region.class_id, region.region_id)


def _trace_batch(args):
    regions, scorer, params = args
    done, errors = [], []
    for reg in regions:
        try:
            done.append(trace_region_polygon(reg, scorer, params))
        except Exception as exc:  # a bad instance must not sink the rest
            errors.append((reg.region_id, f"{type(exc).__name__}: {exc}"))
    return done, errors


def _batched(it, n):
    it = iter(it)
    while chunk := list(islice(it, n)):
        yield chunk


def trace(mask, scorer: Scorer | None = None, params: TraceParams = TraceParams(),
          jobs: int | None = None, batch_size: int = 256) -> TraceResult:
    """Vectorize every region of a class mask.

    Regions are processed independently, in worker processes when
    ``jobs > 1``; results come back in region-id order regardless.
    """
    scorer = scorer or RuleScorer()
    jobs = jobs or os.cpu_count() or 1
    if not scorer.parallel_safe:
        jobs = 1
    result = TraceResult()
    batches = ((b, scorer, params) for b in _batched(iter_regions(mask, params.connectivity), batch_size))
    if jobs == 1:
        parts = map(_trace_batch, batches)
        for done, errors in parts:
            result.polygons.extend(done)
            result.errors.extend(errors)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for done, errors in pool.map(_trace_batch, batches):
                result.polygons.extend(done)
                result.errors.extend(errors)
    for rid, msg in result.errors:
        log.warning("instance %d failed: %s", rid, msg)
    return result


def reconstructed_rings(mask, params: TraceParams = TraceParams()):
    """Yield ``(instance_id, ring_index, R)`` exactly as :func:`trace` first scores them."""
    for reg in iter_regions(mask, params.connectivity):
        rings = trace_region(reg.pixels, params.connectivity, dense=False)
        offset = np.array([reg.col0, reg.row0])
        for k, ring in enumerate(sorted(rings, key=lambda r: signed_area(r) < 0)):
            R = reconstruct(ring + offset, params.epsilon, params.interval)
            if len(R) >= MIN_SCORED_POINTS:
                yield reg.region_id, k, R
