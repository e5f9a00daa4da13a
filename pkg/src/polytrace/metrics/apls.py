"""Average Path Length Similarity between road graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .. import defaults
from ..errors import PolytraceError


@dataclass
class RoadGraph:
    """Undirected graph with node positions in pixel space."""

    nodes: dict = field(default_factory=dict)  # id -> (x, y)
    edges: list = field(default_factory=list)  # (u, v, length)

    def __post_init__(self):
        for u, v, length in self.edges:
            if u not in self.nodes or v not in self.nodes:
                raise PolytraceError("invalid-graph", f"edge {u}-{v} references a missing node")
            if u == v:
                raise PolytraceError("invalid-graph", f"self-loop at node {u}")
            if not length > 0:
                raise PolytraceError("invalid-graph", f"edge {u}-{v} has non-positive length {length}")

    def ids(self) -> list:
        return sorted(self.nodes, key=lambda k: (str(type(k)), k))

    def distance_matrix(self) -> tuple[list, np.ndarray]:
        ids = self.ids()
        index = {k: i for i, k in enumerate(ids)}
        best: dict[tuple[int, int], float] = {}
        for u, v, length in self.edges:
            a, b = sorted((index[u], index[v]))
            best[a, b] = min(length, best.get((a, b), np.inf))
        n = len(ids)
        if best:
            rows, cols = zip(*best)
            w = csr_matrix((list(best.values()), (rows, cols)), shape=(n, n))
        else:
            w = csr_matrix((n, n))
        return ids, shortest_path(w, method="D", directed=False)


def apls(gt: RoadGraph, pred: RoadGraph, node_pairing_radius: float = defaults.APLS_RADIUS) -> float:
    """APLS in percent over all ground-truth node pairs joined by a path.

    Each ground-truth node snaps to the nearest predicted node within the
    radius. A pair whose nodes do not both snap, or whose snapped nodes are
    not connected, costs the full penalty of 1; other pairs cost the
    relative path-length error, capped at 1.
    """
    if not gt.nodes:
        raise PolytraceError("empty-graph", "ground-truth graph has no nodes")
    gids, dg = gt.distance_matrix()
    pids, dp = pred.distance_matrix()
    snap = np.full(len(gids), -1)
    if pids:
        pxy = np.array([pred.nodes[k] for k in pids], dtype=np.float64)
        for i, k in enumerate(gids):
            d = np.hypot(*(pxy - np.asarray(gt.nodes[k], dtype=np.float64)).T)
            j = int(np.argmin(d))
            if d[j] <= node_pairing_radius:
                snap[i] = j
    iu, ju = np.triu_indices(len(gids), k=1)
    dgt = dg[iu, ju]
    valid = np.isfinite(dgt) & (dgt > 0)
    if not valid.any():
        raise PolytraceError("empty-graph", "ground-truth graph has no connected node pairs")
    iu, ju, dgt = iu[valid], ju[valid], dgt[valid]
    si, sj = snap[iu], snap[ju]
    ok = (si >= 0) & (sj >= 0)
    dpr = np.full(len(dgt), np.inf)
    dpr[ok] = dp[si[ok], sj[ok]]
    cost = np.where(np.isfinite(dpr), np.minimum(1.0, np.abs(dpr - dgt) / dgt), 1.0)
    return 100.0 * (1.0 - float(cost.mean()))
