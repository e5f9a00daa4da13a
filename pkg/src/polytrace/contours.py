"""Raster <-> vector bridge: component labeling, border tracing, scanline fill.

Contours run along pixel boundaries, so vertices sit on the integer lattice
and pixel ``(row, col)`` is the unit square ``[col, col+1) x [row, row+1)``.
A single pixel therefore traces to a 4-point unit square and areas are exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
from scipy import ndimage

from .errors import PolytraceError
from .geometry import PolygonWithHoles, Ring, as_points, signed_area

__all__ = [
    "Contour",
    "Region",
    "check_mask",
    "connected_components",
    "iter_regions",
    "trace_region",
    "extract_contours",
    "polygon_pixels",
    "rasterize_polygon",
    "rasterize_polygons",
    "crop_iou",
]

# direction codes: east, south, west, north (y down)
_DX = np.array([1, 0, -1, 0])
_DY = np.array([0, 1, 0, -1])


@dataclass(frozen=True)
class Contour:
    class_id: int
    region_id: int
    polygon: PolygonWithHoles


@dataclass(frozen=True)
class Region:
    """One connected component, cropped to its bounding box."""

    class_id: int
    region_id: int
    row0: int
    col0: int
    pixels: np.ndarray  # bool, bounding-box crop

    @property
    def area(self) -> int:
        return int(self.pixels.sum())


def check_mask(mask) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise PolytraceError("invalid-mask", f"expected a non-empty 2D label grid, got shape {m.shape}")
    if m.dtype != np.uint8:
        if m.size and (m.min() < 0 or m.max() > 255):
            raise PolytraceError("invalid-mask", "class ids must be < 256")
        m = m.astype(np.uint8)
    return m


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise PolytraceError("invalid-connectivity", f"connectivity must be 4 or 8, got {connectivity}")


def _present_classes(mask: np.ndarray) -> list[int]:
    counts = np.bincount(mask.ravel(), minlength=256)
    return [int(c) for c in np.nonzero(counts)[0] if c != 0]


def connected_components(mask, connectivity: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Label foreground regions, never merging pixels of different classes.

    Returns ``(labels, region_class)``: an int32 grid with 0 for background
    and ids 1..n, and an array mapping each id to its class (index 0 unused).
    """
    mask = check_mask(mask)
    structure = _structure(connectivity)
    labels = np.zeros(mask.shape, dtype=np.int32)
    region_class = [0]
    for cls in _present_classes(mask):
        lab, n = ndimage.label(mask == cls, structure=structure)
        sel = lab > 0
        labels[sel] = lab[sel] + (len(region_class) - 1)
        region_class.extend([cls] * n)
    return labels, np.asarray(region_class, dtype=np.int64)


def iter_regions(mask, connectivity: int = 8) -> Iterator[Region]:
    """Yield every region as a bounding-box crop, class by class.

    Region ids follow :func:`connected_components`.
    """
    mask = check_mask(mask)
    structure = _structure(connectivity)
    next_id = 1
    for cls in _present_classes(mask):
        lab, n = ndimage.label(mask == cls, structure=structure)
        for i, slc in enumerate(ndimage.find_objects(lab), start=1):
            yield Region(cls, next_id + i - 1, slc[0].start, slc[1].start, lab[slc] == i)
        next_id += n
        del lab


def _boundary_edges(pix: np.ndarray):
    """Directed boundary edges of a bool crop, region kept on the right."""
    p = np.pad(pix, 1)
    inner = p[1:-1, 1:-1]
    xs, ys, ds = [], [], []
    for d, outside, ox, oy in (
        (0, ~p[:-2, 1:-1], 0, 0),  # top side, heading east
        (1, ~p[1:-1, 2:], 1, 0),  # right side, heading south
        (2, ~p[2:, 1:-1], 1, 1),  # bottom side, heading west
        (3, ~p[1:-1, :-2], 0, 1),  # left side, heading north
    ):
        r, c = np.nonzero(inner & outside)
        xs.append(c + ox)
        ys.append(r + oy)
        ds.append(np.full(len(r), d))
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ds)


def trace_region(pixels: np.ndarray, connectivity: int = 8, dense: bool = True) -> list[np.ndarray]:
    """Follow the pixel-boundary cycles of a single region.

    ``pixels`` is a bool crop holding one connected component. Returns
    integer ``(n, 2)`` vertex arrays in crop coordinates: the exterior has
    positive area, holes negative. At a diagonal pinch the walk turns so
    that pixels connected under ``connectivity`` stay on one ring. With
    ``dense=False`` only direction changes are kept.
    """
    x, y, d = _boundary_edges(np.asarray(pixels, dtype=bool))
    if len(x) == 0:
        return []
    stride = pixels.shape[1] + 3
    key = ((y + 1) * stride + (x + 1)) * 4 + d
    order = np.argsort(key, kind="stable")
    skey = key[order]

    ex = x + _DX[d]
    ey = y + _DY[d]
    base = ((ey + 1) * stride + (ex + 1)) * 4
    turns = (3, 0, 1) if connectivity == 8 else (1, 0, 3)  # left-first vs right-first
    nxt = np.full(len(x), -1, dtype=np.int64)
    for t in turns:
        cand = base + (d + t) % 4
        pos = np.minimum(np.searchsorted(skey, cand), len(skey) - 1)
        hit = (skey[pos] == cand) & (nxt < 0)
        nxt[hit] = order[pos[hit]]
    if np.any(nxt < 0):
        raise PolytraceError("internal", "open boundary chain")

    visited = np.zeros(len(x), dtype=bool)
    nxt_l = nxt.tolist()
    rings = []
    for start in order.tolist():
        if visited[start]:
            continue
        cyc = [start]
        visited[start] = True
        e = nxt_l[start]
        while e != start:
            cyc.append(e)
            visited[e] = True
            e = nxt_l[e]
        cyc = np.asarray(cyc)
        if not dense:
            cd = d[cyc]
            cyc = cyc[cd != np.roll(cd, 1)]
        rings.append(np.stack([x[cyc], y[cyc]], axis=1))
    return rings


def _region_polygon(region: Region, connectivity: int, dense: bool) -> PolygonWithHoles:
    rings = trace_region(region.pixels, connectivity, dense)
    offset = np.array([region.col0, region.row0])
    ext, holes = [], []
    for r in rings:
        a = signed_area(r)
        (ext if a > 0 else holes).append(r + offset)
    if len(ext) != 1:
        raise PolytraceError("internal", f"region {region.region_id} produced {len(ext)} exterior rings")
    return PolygonWithHoles(Ring(ext[0]), [Ring(h) for h in holes])


def extract_contours(mask, connectivity: int = 8, dense: bool = True) -> list[Contour]:
    """Trace every region of ``mask`` into a polygon with holes."""
    return [
        Contour(reg.class_id, reg.region_id, _region_polygon(reg, connectivity, dense))
        for reg in iter_regions(mask, connectivity)
    ]


def _ring_edges(rings: Iterable) -> np.ndarray:
    segs = []
    for r in rings:
        p = as_points(r)
        segs.append(np.concatenate([p, np.roll(p, -1, axis=0)], axis=1))
    return np.concatenate(segs) if segs else np.zeros((0, 4))


def polygon_pixels(poly, shape: tuple[int, int] | None = None):
    """Even-odd scanline fill at pixel centres, restricted to the bounding box.

    ``poly`` is a PolygonWithHoles, a Ring or a point array. Returns
    ``(crop, row0, col0)``; ``crop`` is empty when nothing is covered.
    """
    if isinstance(poly, PolygonWithHoles):
        rings = poly.rings
    else:
        rings = [poly]
    segs = _ring_edges(rings)
    x0, y0, x1, y1 = segs.T
    allx = np.concatenate([x0, x1])
    ally = np.concatenate([y0, y1])
    r0 = int(np.ceil(ally.min() - 0.5))
    r1 = int(np.floor(ally.max() - 0.5))
    c0 = int(np.ceil(allx.min() - 0.5))
    c1 = int(np.floor(allx.max() - 0.5))
    if shape is not None:
        r0, c0 = max(r0, 0), max(c0, 0)
        r1, c1 = min(r1, shape[0] - 1), min(c1, shape[1] - 1)
    if r1 < r0 or c1 < c0:
        return np.zeros((0, 0), dtype=bool), max(r0, 0), max(c0, 0)
    nrow, ncol = r1 - r0 + 1, c1 - c0 + 1

    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    first = np.maximum(np.ceil(ylo - 0.5).astype(np.int64), r0)
    last = np.minimum(np.ceil(yhi - 0.5).astype(np.int64) - 1, r1)
    cnt = np.maximum(last - first + 1, 0)
    cnt[y0 == y1] = 0
    if cnt.sum() == 0:
        return np.zeros((nrow, ncol), dtype=bool), r0, c0
    e = np.repeat(np.arange(len(segs)), cnt)
    rows = first[e] + (np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt))
    yc = rows + 0.5
    xc = x0[e] + (yc - y0[e]) * (x1[e] - x0[e]) / (y1[e] - y0[e])
    col = np.clip(np.floor(xc - 0.5).astype(np.int64) + 1 - c0, 0, ncol)
    flat = (rows - r0) * (ncol + 1) + col
    toggles = np.bincount(flat, minlength=nrow * (ncol + 1)).reshape(nrow, ncol + 1)
    inside = (np.cumsum(toggles, axis=1) & 1).astype(bool)[:, :ncol]
    return inside, r0, c0


def rasterize_polygon(poly, class_id: int, target) -> np.ndarray:
    """Return a copy of ``target`` with ``poly``'s pixels set to ``class_id``."""
    out = check_mask(target).copy()
    _burn(out, poly, class_id)
    return out


def _burn(out: np.ndarray, poly, class_id: int) -> None:
    crop, r0, c0 = polygon_pixels(poly, out.shape)
    if crop.size:
        view = out[r0:r0 + crop.shape[0], c0:c0 + crop.shape[1]]
        view[crop] = class_id


def rasterize_polygons(items: Iterable[tuple[int, object]], shape: tuple[int, int]) -> np.ndarray:
    """Burn ``(class_id, polygon)`` pairs in order; later ones overwrite."""
    out = np.zeros(shape, dtype=np.uint8)
    for class_id, poly in items:
        _burn(out, poly, class_id)
    return out


def crop_iou(a, b) -> float:
    """IoU of two ``(crop, row0, col0)`` pixel sets on a shared grid."""
    ca, ra, ka = a
    cb, rb, kb = b
    na, nb = int(ca.sum()), int(cb.sum())
    if na + nb == 0:
        return 0.0
    r0, k0 = max(ra, rb), max(ka, kb)
    r1 = min(ra + ca.shape[0], rb + cb.shape[0])
    k1 = min(ka + ca.shape[1], kb + cb.shape[1])
    inter = 0
    if r1 > r0 and k1 > k0:
        inter = int(np.count_nonzero(
            ca[r0 - ra:r1 - ra, k0 - ka:k1 - ka] & cb[r0 - rb:r1 - rb, k0 - kb:k1 - kb]))
    return inter / (na + nb - inter)
