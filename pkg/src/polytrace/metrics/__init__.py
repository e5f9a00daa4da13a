from .apls import RoadGraph, apls
from .overlap import IOU_THRESHOLDS, ciou, instance_ap, relative_difference, semantic_iou_f1
from .polis import boundary_distances, polis
from .report import ALL_METRICS, MetricsReport, evaluate, match_instances

__all__ = [
    "RoadGraph", "apls", "IOU_THRESHOLDS", "ciou", "instance_ap", "relative_difference",
    "semantic_iou_f1", "boundary_distances", "polis", "ALL_METRICS", "MetricsReport",
    "evaluate", "match_instances",
]
