"""Overlap-based metrics: complexity-aware IoU, semantic IoU/F1 and instance AP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..contours import crop_iou, polygon_pixels
from ..errors import PolytraceError
from ..geometry import PolygonWithHoles, Ring

IOU_THRESHOLDS = np.round(0.5 + 0.05 * np.arange(10), 2)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
AREA_RANGES = {
    "all": (0, np.inf),
    "small": (0, 128 ** 2),
    "medium": (128 ** 2, 512 ** 2),
    "large": (512 ** 2, np.inf),
}


def _vertex_count(p) -> int:
    if isinstance(p, PolygonWithHoles):
        return p.vertex_count
    return len(p) if isinstance(p, Ring) else len(np.asarray(p))


def relative_difference(n_a: int, n_b: int) -> float:
    return abs(n_a - n_b) / (n_a + n_b) if n_a + n_b else 0.0


def ciou(a, b, n_a: int | None = None, n_b: int | None = None, shape=None) -> float:
    """Mask IoU times ``1 - |N_a - N_b| / (N_a + N_b)``, in percent.

    Vertex counts default to the polygons' own.
    """
    n_a = _vertex_count(a) if n_a is None else n_a
    n_b = _vertex_count(b) if n_b is None else n_b
    if n_a < 3 or n_b < 3:
        raise PolytraceError("degenerate-ring", "C-IoU needs polygons with at least 3 vertices")
    iou = crop_iou(polygon_pixels(a, shape), polygon_pixels(b, shape))
    return 100.0 * iou * (1.0 - relative_difference(n_a, n_b))


def semantic_iou_f1(pred, gt) -> tuple[float, float]:
    """Class-averaged IoU and F1 over foreground classes, in percent.

    Classes appearing in neither mask are ignored; two empty masks agree
    perfectly.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise PolytraceError("dimension-mismatch", f"{pred.shape} vs {gt.shape}")
    conf = np.bincount(gt.astype(np.int64).ravel() * 256 + pred.astype(np.int64).ravel(),
                       minlength=256 * 256).reshape(256, 256)
    tp = np.diag(conf)
    fn = conf.sum(axis=1) - tp
    fp = conf.sum(axis=0) - tp
    classes = [c for c in range(1, 256) if tp[c] + fn[c] + fp[c] > 0]
    if not classes:
        return 100.0, 100.0
    ious = [tp[c] / (tp[c] + fp[c] + fn[c]) for c in classes]
    f1s = [2 * tp[c] / (2 * tp[c] + fp[c] + fn[c]) for c in classes]
    return 100.0 * float(np.mean(ious)), 100.0 * float(np.mean(f1s))


@dataclass
class Instances:
    """Rasterized instances: pixel crops, bounding boxes and pixel areas."""

    crops: list
    boxes: np.ndarray
    areas: np.ndarray

    @classmethod
    def from_polygons(cls, polys, shape=None) -> "Instances":
        crops = [polygon_pixels(p, shape) for p in polys]
        boxes = np.array([(r, c, r + m.shape[0], c + m.shape[1]) for m, r, c in crops],
                         dtype=np.int64).reshape(-1, 4)
        areas = np.array([int(m.sum()) for m, _, _ in crops], dtype=np.int64)
        return cls(crops, boxes, areas)

    def __len__(self) -> int:
        return len(self.crops)


def pairwise_iou(a: Instances, b: Instances) -> dict[int, list[tuple[int, float]]]:
    """Sparse IoU table: for each instance of ``a``, ``(j, iou)`` with iou > 0."""
    out: dict[int, list[tuple[int, float]]] = {}
    for i in range(len(a)):
        r0, c0, r1, c1 = a.boxes[i]
        if len(b) == 0:
            out[i] = []
            continue
        hit = (b.boxes[:, 0] < r1) & (b.boxes[:, 2] > r0) & (b.boxes[:, 1] < c1) & (b.boxes[:, 3] > c0)
        row = []
        for j in np.nonzero(hit)[0]:
            iou = crop_iou(a.crops[i], b.crops[j])
            if iou > 0:
                row.append((int(j), iou))
        out[i] = row
    return out


def _ap_single(scores, det_area, gt_area, ious, lo, hi, t) -> float | None:
    gt_ignore = (gt_area < lo) | (gt_area >= hi)
    n_pos = int((~gt_ignore).sum())
    if n_pos == 0:
        return None
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="mergesort")
    gt_taken = np.zeros(len(gt_area), dtype=bool)
    tp, fp = [], []
    for d in order:
        cands = sorted(ious.get(int(d), []), key=lambda gv: (bool(gt_ignore[gv[0]]), gv[0]))
        best, best_iou = -1, t
        for g, iou in cands:
            if gt_taken[g]:
                continue
            if best >= 0 and not gt_ignore[best] and gt_ignore[g]:
                break  # regular ground truth wins over ignored
            if iou < t or (best >= 0 and iou <= best_iou):
                continue
            best, best_iou = g, iou
        if best >= 0:
            gt_taken[best] = True
            if gt_ignore[best]:
                continue
            tp.append(1)
            fp.append(0)
        else:
            if det_area[d] < lo or det_area[d] >= hi:
                continue
            tp.append(0)
            fp.append(1)
    if not tp:
        return 0.0
    tps = np.cumsum(tp)
    fps = np.cumsum(fp)
    recall = tps / n_pos
    precision = tps / (tps + fps)
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, RECALL_POINTS, side="left")
    q = np.where(idx < len(precision), precision[np.minimum(idx, len(precision) - 1)], 0.0)
    return float(q.mean())


def instance_ap(preds, scores, gts, shape=None, pred_classes=None, gt_classes=None) -> dict[str, float | None]:
    """Mean AP over IoU 0.50:0.05:0.95 with 101-point interpolation, in percent.

    Detections are greedily matched in descending score order, each ground
    truth at most once. Size bins follow the ground truth's pixel area;
    a bin without ground truth is ``None``. With class ids given, AP is
    computed per class and averaged.
    """
    P = Instances.from_polygons(preds, shape)
    G = Instances.from_polygons(gts, shape)
    scores = np.asarray(scores, dtype=np.float64)
    if np.any((scores < 0) | (scores > 1)):
        raise PolytraceError("invalid-score", "scores must lie in [0, 1]")
    pc = np.zeros(len(P), dtype=np.int64) if pred_classes is None else np.asarray(pred_classes)
    gc = np.zeros(len(G), dtype=np.int64) if gt_classes is None else np.asarray(gt_classes)
    table = pairwise_iou(P, G)
    out: dict[str, float | None] = {}
    for name, (lo, hi) in AREA_RANGES.items():
        per_class = []
        for cls in sorted(set(gc.tolist())):
            di = np.nonzero(pc == cls)[0]
            gi = np.nonzero(gc == cls)[0]
            remap = {int(g): k for k, g in enumerate(gi)}
            ious = {k: [(remap[g], v) for g, v in table[int(d)] if g in remap] for k, d in enumerate(di)}
            vals = [_ap_single(scores[di], P.areas[di], G.areas[gi], ious, lo, hi, t) for t in IOU_THRESHOLDS]
            vals = [v for v in vals if v is not None]
            if vals:
                per_class.append(float(np.mean(vals)))
        out[name] = 100.0 * float(np.mean(per_class)) if per_class else None
    if out["all"] is None:
        out["all"] = 0.0
    return out
