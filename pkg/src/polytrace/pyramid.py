"""Multi-scale pyramid slicing for large rasters, and stitching back.

Every window group shares one centre: the bottom patch covers ``W x W``
source pixels and the level-``k`` patch covers ``d_k * W`` source pixels
around the same centre, resampled to ``W x W``. Where a level's extent
leaves the image, the missing pixels are filled by mirror reflection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import PolytraceError


@dataclass(frozen=True)
class PyramidConfig:
    rates: tuple[int, ...]
    window: int
    stride: int

    def __post_init__(self):
        rates = tuple(int(r) for r in self.rates)
        if not rates or rates[0] != 1 or any(b <= a for a, b in zip(rates, rates[1:])):
            raise PolytraceError("invalid-rates", f"rates must start at 1 and increase strictly, got {rates}")
        if self.window <= 0 or not 0 < self.stride <= self.window:
            raise PolytraceError("invalid-window", f"need window > 0 and 0 < stride <= window")
        object.__setattr__(self, "rates", rates)


@dataclass
class WindowGroup:
    index: int
    anchor: tuple[int, int]  # bottom-level (row, col) of the top-left pixel
    extents: list[tuple[float, float, float, float]]  # per level (x0, y0, x1, y1), source pixels
    clamped: list[tuple[float, float, float, float]]  # extents cut to the image
    patches: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def is_interior(self) -> bool:
        return all(e == c for e, c in zip(self.extents, self.clamped))


def _block_sum(a: np.ndarray, d: int) -> np.ndarray:
    h, w = a.shape[:2]
    return a.reshape(h // d, d, w // d, d, *a.shape[2:]).sum(axis=(1, 3))


def _pad_to(a: np.ndarray, d: int, value=0) -> np.ndarray:
    h, w = a.shape[:2]
    ph, pw = -h % d, -w % d
    if ph == 0 and pw == 0:
        return a
    return np.pad(a, ((0, ph), (0, pw)) + ((0, 0),) * (a.ndim - 2), constant_values=value)


def _block_counts(n: int, d: int) -> np.ndarray:
    """Pixels per block along one axis when ``n`` is cut into ``d``-wide blocks."""
    counts = np.full(-(-n // d), d, dtype=np.int64)
    counts[-1] = n - d * (len(counts) - 1)
    return counts


def downsample(raster: np.ndarray, rate: int, kind: str = "image") -> np.ndarray:
    """Area-average (``image``) or majority-vote (``mask``) ``rate x rate`` blocks.

    Output size is ``ceil(H / rate) x ceil(W / rate)``; partial border
    blocks use only the pixels they contain. Majority ties go to the
    smaller class id.
    """
    a = np.asarray(raster)
    if kind not in ("image", "mask"):
        raise PolytraceError("invalid-kind", f"kind must be 'image' or 'mask', got {kind!r}")
    if rate == 1:
        return a.copy()
    h, w = a.shape[:2]
    count = np.outer(_block_counts(h, rate), _block_counts(w, rate))
    padded = _pad_to(a, rate)
    if kind == "mask":
        classes = np.nonzero(np.bincount(a.ravel(), minlength=256))[0]
        best = np.zeros(count.shape, dtype=a.dtype)
        best_n = np.full(count.shape, -1, dtype=np.int64)
        for c in classes:
            n = _block_sum(padded == c, rate)
            if c == 0:
                n = n - (rate * rate - count)  # padding is zero-filled
            upd = n > best_n
            best[upd] = c
            best_n[upd] = n[upd]
        return best
    s = _block_sum(padded.astype(np.float64), rate)
    mean = s / (count[..., None] if a.ndim == 3 else count)
    if np.issubdtype(a.dtype, np.integer):
        return np.clip(np.rint(mean), np.iinfo(a.dtype).min, np.iinfo(a.dtype).max).astype(a.dtype)
    return mean.astype(a.dtype)


def build_pyramid(raster, rates: Iterable[int], kind: str = "image") -> list[np.ndarray]:
    """Level ``k`` is the source downsampled by ``rates[k]``; level 0 is the source."""
    return [downsample(raster, int(d), kind) for d in rates]


def _positions(n: int, window: int, stride: int) -> list[int]:
    pos = list(range(0, n - window + 1, stride))
    if pos[-1] + window < n:
        pos.append(n - window)
    return pos


def window_anchors(height: int, width: int, window: int, stride: int) -> list[tuple[int, int]]:
    """Row-major top-left anchors covering the image; the last row/column is flush with the border."""
    if window > height or window > width:
        raise PolytraceError("window-too-large", f"window {window} exceeds image {height}x{width}")
    return [(r, c) for r in _positions(height, window, stride) for c in _positions(width, window, stride)]


def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    m = np.mod(idx, period)
    return np.where(m < n, m, period - m)


def level_extent(anchor: tuple[int, int], window: int, rate: int) -> tuple[float, float, float, float]:
    cy = anchor[0] + window / 2
    cx = anchor[1] + window / 2
    half = rate * window / 2
    return (cx - half, cy - half, cx + half, cy + half)


def _patch(level: np.ndarray, extent, rate: int, window: int) -> np.ndarray:
    x0 = int(np.floor(extent[0] / rate + 0.5))
    y0 = int(np.floor(extent[1] / rate + 0.5))
    if 0 <= y0 and y0 + window <= level.shape[0] and 0 <= x0 and x0 + window <= level.shape[1]:
        return level[y0:y0 + window, x0:x0 + window].copy()
    rows = _reflect(np.arange(y0, y0 + window), level.shape[0])
    cols = _reflect(np.arange(x0, x0 + window), level.shape[1])
    return level[np.ix_(rows, cols)]


def slice_windows(pyramid: list[np.ndarray], config: PyramidConfig, with_patches: bool = True,
                  ) -> Iterator[WindowGroup]:
    """Yield aligned window groups in row-major anchor order."""
    if len(pyramid) != len(config.rates):
        raise PolytraceError("invalid-rates", "pyramid depth differs from the number of rates")
    h, w = pyramid[0].shape[:2]
    for i, anchor in enumerate(window_anchors(h, w, config.window, config.stride)):
        extents, clamped, patches = [], [], []
        for level, d in zip(pyramid, config.rates):
            e = level_extent(anchor, config.window, d)
            extents.append(e)
            clamped.append((max(e[0], 0.0), max(e[1], 0.0), min(e[2], float(w)), min(e[3], float(h))))
            if with_patches:
                patches.append(_patch(level, e, d, config.window))
        yield WindowGroup(i, anchor, extents, clamped, patches)


def stitch(items: Iterable[tuple[tuple[int, int], np.ndarray]], height: int, width: int,
           window: int, stride: int) -> np.ndarray:
    """Write bottom-level ``(anchor, mask)`` predictions back into one raster.

    Overlaps resolve in row-major anchor order, later anchors winning. Every
    anchor of the tiling must be present.
    """
    expected = window_anchors(height, width, window, stride)
    got = {}
    for anchor, mask in items:
        mask = np.asarray(mask)
        if mask.shape[:2] != (window, window):
            raise PolytraceError("invalid-patch", f"patch at {anchor} has shape {mask.shape}")
        got[tuple(int(v) for v in anchor)] = mask
    missing = [a for a in expected if a not in got]
    if missing:
        raise PolytraceError("incomplete-coverage", f"{len(missing)} window(s) missing, first at {missing[0]}")
    first = got[expected[0]]
    out = np.zeros((height, width) + first.shape[2:], dtype=first.dtype)
    for r, c in expected:
        out[r:r + window, c:c + window] = got[r, c]
    return out


MANIFEST = "manifest.json"


def export_groups(raster: np.ndarray, config: PyramidConfig, out_dir, kind: str = "mask") -> Path:
    """Write every patch as PNG plus a JSON manifest; returns the manifest path."""
    from .io import write_image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pyramid = build_pyramid(raster, config.rates, kind)
    groups = []
    for g in slice_windows(pyramid, config):
        levels = []
        for k, (d, e, c, patch) in enumerate(zip(config.rates, g.extents, g.clamped, g.patches)):
            name = f"g{g.index:05d}_l{k}.png"
            write_image(patch, out / name)
            levels.append({"rate": d, "extent": list(e), "clamped": list(c), "file": name})
        groups.append({"index": g.index, "anchor": list(g.anchor), "levels": levels})
    manifest = {
        "height": int(raster.shape[0]), "width": int(raster.shape[1]), "kind": kind,
        "rates": list(config.rates), "window": config.window, "stride": config.stride, "groups": groups,
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=1) + "\n")
    return path


def stitch_manifest(manifest_path, pred_dir=None) -> np.ndarray:
    """Stitch the bottom-level patches named in a manifest.

    ``pred_dir`` holds replacement patches (same file names), e.g. the output
    of a segmentation model; by default the exported patches are used.
    """
    from .io import read_mask

    path = Path(manifest_path)
    if path.is_dir():
        path = path / MANIFEST
    try:
        m = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PolytraceError("invalid-manifest", f"{path}: line {exc.lineno}: {exc.msg}") from None
    src = Path(pred_dir) if pred_dir else path.parent
    items = ((tuple(g["anchor"]), read_mask(src / g["levels"][0]["file"]))
             for g in m["groups"] if (src / g["levels"][0]["file"]).exists())
    return stitch(items, m["height"], m["width"], m["window"], m["stride"])
