"""Layer-level evaluation combining every metric into one report."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import defaults
from ..contours import rasterize_polygons
from .apls import RoadGraph, apls
from .overlap import Instances, instance_ap, pairwise_iou, relative_difference, semantic_iou_f1
from .polis import polis

ALL_METRICS = ("polis", "ciou", "ap", "iou", "f1", "apls")


@dataclass
class MetricsReport:
    polis: float | None = None
    ciou: float | None = None
    iou: float | None = None
    f1: float | None = None
    ap: float | None = None
    ap_s: float | None = None
    ap_m: float | None = None
    ap_l: float | None = None
    apls: float | None = None
    counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def match_instances(pred: Instances, gt: Instances, pred_classes, gt_classes,
                    min_iou: float = defaults.PAIR_IOU) -> list[tuple[int, int, float]]:
    """One-to-one pairs of same-class instances with IoU >= ``min_iou``, best IoU first."""
    table = pairwise_iou(pred, gt)
    cands = [(iou, i, j) for i, row in table.items() for j, iou in row
             if iou >= min_iou and pred_classes[i] == gt_classes[j]]
    cands.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_p, used_g, pairs = set(), set(), []
    for iou, i, j in cands:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((i, j, iou))
    return sorted(pairs)


def layer_shape(*polygon_lists) -> tuple[int, int]:
    xmax = ymax = 1.0
    for polys in polygon_lists:
        for p in polys:
            _, _, x1, y1 = p.bounds()
            xmax, ymax = max(xmax, x1), max(ymax, y1)
    return int(math.ceil(ymax)), int(math.ceil(xmax))


def evaluate(pred_polys, pred_scores, pred_classes, gt_polys, gt_classes, *, gt_mask=None, shape=None,
             metrics=ALL_METRICS, graph_gt: RoadGraph | None = None, graph_pred: RoadGraph | None = None,
             apls_radius: float = defaults.APLS_RADIUS) -> MetricsReport:
    """Compare a predicted polygon layer with ground truth.

    PoLiS averages over one-to-one pairs with mask IoU >= 0.5. C-IoU treats
    each layer as one mask and compares total vertex counts. Semantic
    metrics use ``gt_mask`` when given, otherwise the rasterized ground
    truth, on the grid ``shape`` (default: the layers' extent).
    """
    metrics = set(metrics)
    if gt_mask is not None:
        shape = np.asarray(gt_mask).shape
    if shape is None:
        shape = layer_shape(pred_polys, gt_polys)
    report = MetricsReport()
    pc = list(pred_classes)
    gc = list(gt_classes)

    P = Instances.from_polygons(pred_polys, shape)
    G = Instances.from_polygons(gt_polys, shape)
    pairs = match_instances(P, G, pc, gc)
    report.counts = {
        "pred": len(P), "gt": len(G), "matched": len(pairs),
        "unmatched_pred": len(P) - len(pairs), "unmatched_gt": len(G) - len(pairs),
    }

    if "polis" in metrics and pairs:
        report.polis = float(np.mean([polis(pred_polys[i].exterior, gt_polys[j].exterior) for i, j, _ in pairs]))

    need_masks = metrics & {"ciou", "iou", "f1"}
    if need_masks:
        pmask = rasterize_polygons(zip(pc, pred_polys), shape)
        gmask = np.asarray(gt_mask) if gt_mask is not None else rasterize_polygons(zip(gc, gt_polys), shape)
        if "ciou" in metrics:
            pm, gm = pmask > 0, gmask > 0
            union = int(np.count_nonzero(pm | gm))
            iou = np.count_nonzero(pm & gm) / union if union else 1.0
            rd = relative_difference(sum(p.vertex_count for p in pred_polys),
                                     sum(p.vertex_count for p in gt_polys))
            report.ciou = 100.0 * iou * (1.0 - rd)
        if metrics & {"iou", "f1"}:
            iou, f1 = semantic_iou_f1(pmask, gmask)
            report.iou = iou if "iou" in metrics else None
            report.f1 = f1 if "f1" in metrics else None

    if "ap" in metrics:
        ap = instance_ap(pred_polys, pred_scores, gt_polys, shape, pc, gc)
        report.ap, report.ap_s, report.ap_m, report.ap_l = ap["all"], ap["small"], ap["medium"], ap["large"]

    if "apls" in metrics and graph_gt is not None and graph_pred is not None:
        report.apls = apls(graph_gt, graph_pred, apls_radius)
    return report
