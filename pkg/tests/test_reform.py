import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polytrace.contours import iter_regions, rasterize_polygons, trace_region
from polytrace.errors import PolytraceError
from polytrace.geometry import PolygonWithHoles, Ring, dp_simplify, resample_ring, signed_area
from polytrace.reform import make_training_labels, match_to_ground_truth, nearest_indices, reconstruct

from conftest import noisy_square, random_rectilinear

SQ100 = np.array([(0, 0), (100, 0), (100, 100), (0, 100)], float)


def align_oracle(R, G):
    """Direct loop transcription of the alignment procedure."""
    R = np.asarray(R, float)
    G = np.asarray(G, float)
    if signed_area(G) * signed_area(R) < 0:
        G = G[::-1]
    marked = {}
    for j, g in enumerate(G):
        best, best_d = 0, math.inf
        for i, r in enumerate(R):
            d = math.dist(r, g)
            if d < best_d:
                best, best_d = i, d
        marked.setdefault(best, j)
    idx = sorted(marked)
    N, P = len(R), len(idx)
    Gp = [None] * N
    for k in range(P):
        i0 = idx[k]
        i1 = idx[(k + 1) % P] + (N if k == P - 1 else 0)
        a, b = G[marked[idx[k]]], G[marked[idx[(k + 1) % P]]]
        n_k = i1 - i0 - 1
        for m in range(n_k + 1):
            Gp[(i0 + m) % N] = a + m / (n_k + 1) * (b - a)
    C = [1 if i in marked else 0 for i in range(N)]
    return np.array(Gp), np.array(C), P


def test_square_example():
    R = reconstruct(SQ100, 5, 25)
    s = match_to_ground_truth(R, SQ100)
    assert len(s.G_prime) == len(s.C) == len(R) == 16
    assert np.nonzero(s.C)[0].tolist() == [0, 4, 8, 12]
    assert np.array_equal(s.G_prime[s.C == 1], SQ100)
    assert np.allclose(s.G_prime, R.points)
    assert not s.crossing


def test_identity_matching():
    R = Ring(noisy_square(np.random.default_rng(1), n=40))
    s = match_to_ground_truth(R, R)
    assert s.C.all() and s.P == len(R)
    assert np.array_equal(s.G_prime, R.points)


def test_degenerate_collapse():
    R, _ = resample_ring(SQ100, 25)
    # two GT vertices both nearest to R[4] = (100, 0)
    G = np.array([(0, 0), (99, -1), (101, 1), (100, 100), (0, 100)], float)
    s = match_to_ground_truth(R, G)
    assert s.P == len(G) - 1 and s.C.sum() == s.P
    gp, c, P = align_oracle(R.points, G)
    assert P == s.P and np.array_equal(c, s.C) and np.allclose(gp, s.G_prime)
    assert np.array_equal(s.G_prime[4], G[1])  # the first in GT order survives


def test_reversed_gt_orientation():
    R = reconstruct(SQ100, 5, 25)
    s = match_to_ground_truth(R, SQ100[::-1])
    assert np.allclose(s.G_prime, R.points)


def test_errors():
    with pytest.raises(PolytraceError) as e:
        match_to_ground_truth(np.zeros((0, 2)), SQ100)
    assert e.value.code == "empty-polygon"
    with pytest.raises(PolytraceError):
        match_to_ground_truth(SQ100, SQ100[:2])


def test_nearest_ties_lowest_index():
    pts = np.array([[1.0, 0], [-1, 0], [0, 1]])
    assert nearest_indices(pts, np.zeros((1, 2))).tolist() == [0]
    assert nearest_indices(pts, np.zeros((1, 2)), chunk=1).tolist() == [0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(5, 40), st.floats(0, 6))
def test_matches_loop_oracle(seed, l, jitter):
    rng = np.random.default_rng(seed)
    G = random_rectilinear(rng, min_edge=16)
    R = reconstruct(G + rng.uniform(-jitter, jitter, G.shape), 3, l)
    s = match_to_ground_truth(R, G)
    gp, c, P = align_oracle(R.points, G)
    assert s.P == P and np.array_equal(s.C, c)
    assert np.allclose(s.G_prime, gp, atol=1e-9)
    assert len(s.G_prime) == len(R)
    assert s.offsets.shape == (len(R), 2)


def test_noisy_square_reconstruct():
    # a 100 px square whose outermost pixel rows and columns are randomly eaten away
    rng = np.random.default_rng(7)
    px = np.ones((100, 100), bool)
    edge = np.zeros_like(px)
    edge[[0, -1], 1:-1] = edge[1:-1, [0, -1]] = True
    px &= ~(edge & (rng.random(px.shape) < 0.3))
    (ring,) = trace_region(px)
    R = reconstruct(ring, 5, 25)
    assert len(R) == 16
    assert np.allclose(R.points[::4], SQ100, atol=1)


def test_training_labels_self_pairing():
    rng = np.random.default_rng(11)
    polys = []
    x = 4
    for _ in range(50):
        p = random_rectilinear(rng, min_edge=12, max_cols=3, spread=10, margin=0)
        p = p + [x, 4]
        x = p[:, 0].max() + 4
        polys.append(PolygonWithHoles(p))
    h = int(max(p.bounds()[3] for p in polys)) + 4
    w = int(x) + 4
    mask = rasterize_polygons([(1, p) for p in polys], (h, w))
    batch = make_training_labels(mask, polys, 5, 25)
    assert len(batch.samples) == 50 and batch.skipped == 0
    for s in batch.samples:
        assert len(s.G_prime) == len(s.R) == len(s.C)
        assert s.C.sum() == s.P <= 4 * 8


def test_training_labels_spurious_blob():
    gt = [PolygonWithHoles(SQ100 + 5)]
    mask = rasterize_polygons([(1, gt[0])], (200, 200))
    mask[150:160, 150:160] = 1
    batch = make_training_labels(mask, gt)
    assert len(batch.samples) == 1 and batch.skipped == 1


def test_training_labels_holes():
    gt = [PolygonWithHoles([(0, 0), (80, 0), (80, 80), (0, 80)], [[(20, 20), (60, 20), (60, 60), (20, 60)]])]
    mask = rasterize_polygons([(1, gt[0])], (90, 90))
    batch = make_training_labels(mask, gt)
    assert [s.ring for s in batch.samples] == [0, 1]
    assert all(np.allclose(s.G_prime[s.C == 1], s.R.points[s.C == 1]) for s in batch.samples)


def test_training_labels_empty_gt():
    with pytest.raises(PolytraceError):
        make_training_labels(np.zeros((4, 4), np.uint8), [])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 8), st.sampled_from([4, 8]))
def test_reconstruct_same_from_compressed_contour(seed, eps, conn):
    rng = np.random.default_rng(seed)
    m = (rng.random((24, 30)) < 0.6).astype(np.uint8)
    for reg in iter_regions(m, conn):
        dense = trace_region(reg.pixels, conn, dense=True)
        sparse = trace_region(reg.pixels, conn, dense=False)
        for d, s in zip(dense, sparse):
            if len(s) < 3:
                continue
            assert dp_simplify(d, eps) == dp_simplify(s, eps)
