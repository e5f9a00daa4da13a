"""Raster-mask vectorization, training-label alignment and vector-map metrics."""

from .contours import extract_contours, rasterize_polygon, rasterize_polygons
from .errors import FormatError, PolytraceError
from .geometry import PolygonWithHoles, Ring, dp_simplify, interior_angles, resample_ring, signed_area
from .reform import MatchedSample, make_training_labels, match_to_ground_truth, reconstruct
from .tracer import RuleScorer, Scorer, TracedPolygon, TraceParams, trace

__version__ = "0.1.0"

__all__ = [
    "extract_contours", "rasterize_polygon", "rasterize_polygons", "FormatError", "PolytraceError",
    "PolygonWithHoles", "Ring", "dp_simplify", "interior_angles", "resample_ring", "signed_area",
    "MatchedSample", "make_training_labels", "match_to_ground_truth", "reconstruct",
    "RuleScorer", "Scorer", "TracedPolygon", "TraceParams", "trace",
]
