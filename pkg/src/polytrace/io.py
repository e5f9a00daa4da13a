"""File formats: GeoJSON layers, PNG/PGM masks, JSON-lines labels and scores,
road-graph text files and metric reports."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from PIL import Image

from .errors import FormatError, PolytraceError
from .geometry import PolygonWithHoles, Ring, signed_area
from .metrics.apls import RoadGraph
from .reform import MatchedSample
from .tracer import PointScores, TracedPolygon

IDENTITY = (0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


# --- vector layers -----------------------------------------------------------

@dataclass
class Feature:
    class_id: int
    polygon: PolygonWithHoles
    score: float | None = None
    vertex_conf: list[list[float]] | None = None
    properties: dict = field(default_factory=dict)  # anything else, carried through


@dataclass
class VectorLayer:
    """Polygons in pixel space plus the pixel -> world affine transform.

    ``transform`` uses the GDAL geotransform order:
    ``X = t0 + px*t1 + py*t2`` and ``Y = t3 + px*t4 + py*t5``.
    """

    features: list[Feature] = field(default_factory=list)
    transform: tuple[float, ...] = IDENTITY

    def __post_init__(self):
        t = tuple(float(v) for v in self.transform)
        if len(t) != 6 or t[1] * t[5] - t[2] * t[4] == 0:
            raise PolytraceError("invalid-transform", f"transform must be 6 invertible coefficients, got {t}")
        self.transform = t

    @classmethod
    def from_traced(cls, traced: Iterable[TracedPolygon], transform=IDENTITY) -> "VectorLayer":
        feats = [Feature(t.class_id, t.polygon, t.instance_score, [c.tolist() for c in t.vertex_conf],
                         {"instance_id": t.instance_id}) for t in traced]
        return cls(feats, transform)

    def to_world(self, pts: np.ndarray) -> np.ndarray:
        t = self.transform
        return np.stack([t[0] + pts[:, 0] * t[1] + pts[:, 1] * t[2],
                         t[3] + pts[:, 0] * t[4] + pts[:, 1] * t[5]], axis=1)

    def to_pixel(self, pts: np.ndarray) -> np.ndarray:
        t = self.transform
        det = t[1] * t[5] - t[2] * t[4]
        x = pts[:, 0] - t[0]
        y = pts[:, 1] - t[3]
        return np.stack([(x * t[5] - y * t[2]) / det, (y * t[1] - x * t[4]) / det], axis=1)


def _coord_list(pts: np.ndarray) -> list:
    closed = np.vstack([pts, pts[:1]])
    return [[round(float(x), 3) + 0.0, round(float(y), 3) + 0.0] for x, y in closed]


def _geometry(poly: PolygonWithHoles, layer: VectorLayer) -> dict:
    rings = []
    for k, ring in enumerate(poly.rings):
        w = layer.to_world(ring.points)
        # right-hand rule in world space: exterior positive, holes negative
        if (signed_area(w) > 0) != (k == 0):
            w = w[::-1]
        rings.append(_coord_list(w))
    return {"type": "Polygon", "coordinates": rings}


def write_vector_layer(layer: VectorLayer, path) -> None:
    """GeoJSON FeatureCollection, one feature per line, coordinates to 3 decimals."""
    lines = []
    for f in layer.features:
        props = {"class_id": int(f.class_id)}
        if f.score is not None:
            props["score"] = float(f.score)
        if f.vertex_conf is not None:
            props["vertex_conf"] = [[float(v) for v in ring] for ring in f.vertex_conf]
        for k, v in f.properties.items():
            props.setdefault(k, v)
        feat = {"type": "Feature", "properties": props, "geometry": _geometry(f.polygon, layer)}
        lines.append(json.dumps(feat, separators=(",", ":")))
    head = json.dumps({"type": "FeatureCollection", "transform": list(layer.transform)},
                      separators=(",", ":"))[:-1]
    body = ",\n".join(lines)
    text = head + ',"features":[\n' + body + ("\n" if body else "") + "]}\n"
    Path(path).write_text(text)


def _parse_polygon(coords, layer: VectorLayer, where: str) -> PolygonWithHoles:
    try:
        rings = []
        for ring in coords:
            pts = np.asarray(ring, dtype=np.float64)[:, :2]
            if len(pts) > 1 and np.all(pts[0] == pts[-1]):
                pts = pts[:-1]
            rings.append(Ring(layer.to_pixel(pts)))
        return PolygonWithHoles(rings[0], rings[1:])
    except (PolytraceError, ValueError, IndexError, TypeError) as exc:
        raise FormatError("invalid-geometry", f"{where}: {exc}") from None


def read_vector_layer(path) -> VectorLayer:
    """Read Polygon and MultiPolygon features; MultiPolygon parts become separate features."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError("parse-error", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise FormatError("parse-error", f"{path}: expected a FeatureCollection")
    layer = VectorLayer([], doc.get("transform", IDENTITY))
    for i, feat in enumerate(doc.get("features", [])):
        where = f"{path}: feature {i}"
        geom = (feat or {}).get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            parts = [geom.get("coordinates")]
        elif gtype == "MultiPolygon":
            parts = geom.get("coordinates")
        else:
            raise FormatError("unsupported-geometry", f"{where}: unsupported geometry type {gtype}")
        props = dict(feat.get("properties") or {})
        class_id = int(props.pop("class_id", 1))
        score = props.pop("score", None)
        conf = props.pop("vertex_conf", None)
        for coords in parts:
            layer.features.append(Feature(class_id, _parse_polygon(coords, layer, where), score, conf, props))
    return layer


# --- rasters -----------------------------------------------------------------

def _pgm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        if data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif data[pos:pos + 1].isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    return data[start:pos], pos


def _read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    pos = 2
    vals = []
    for _ in range(3):
        tok, pos = _pgm_token(data, pos)
        try:
            vals.append(int(tok))
        except ValueError:
            raise FormatError("parse-error", f"{path}: bad PGM header field {tok!r}") from None
    width, height, maxval = vals
    if maxval > 255:
        raise FormatError("unsupported-raster", f"{path}: {maxval}-level PGM is not 8-bit")
    pos += 1  # single whitespace before the raster
    if len(data) - pos < width * height:
        raise FormatError("parse-error", f"{path}: PGM raster truncated")
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return raw.reshape(height, width).copy()


def read_mask(path) -> np.ndarray:
    """8-bit single-channel PNG or binary PGM (P5); pixel value = class id."""
    with open(path, "rb") as fh:
        magic = fh.read(2)
    if magic == b"P5":
        return _read_pgm(path)
    try:
        img = Image.open(path)
    except OSError as exc:
        raise FormatError("unsupported-raster", f"{path}: {exc}") from None
    if img.mode not in ("L", "P", "1"):
        raise FormatError("unsupported-raster", f"{path}: mode {img.mode} is not 8-bit single-channel")
    return np.asarray(img, dtype=np.uint8).copy()


def write_mask(mask, path) -> None:
    m = np.asarray(mask)
    if m.ndim != 2 or m.dtype != np.uint8:
        raise FormatError("unsupported-raster", f"mask must be 2D uint8, got {m.dtype} {m.shape}")
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        h, w = m.shape
        path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + np.ascontiguousarray(m).tobytes())
    else:
        Image.fromarray(np.ascontiguousarray(m)).save(path, format="PNG")


def read_image(path) -> np.ndarray:
    return np.asarray(Image.open(path)).copy()


def write_image(arr, path) -> None:
    a = np.asarray(arr)
    if a.ndim == 2 and a.dtype == np.uint8:
        write_mask(a, path)
    else:
        Image.fromarray(a).save(path, format="PNG")


# --- labels and scores ---------------------------------------------------------

def _dump_line(rec: dict) -> str:
    return json.dumps(rec, separators=(",", ":"))


def write_labels(samples: Iterable[MatchedSample], path) -> None:
    with open(path, "w") as fh:
        for s in samples:
            fh.write(_dump_line({
                "instance_id": int(s.instance_id), "ring": int(s.ring), "class_id": int(s.class_id),
                "R": s.R.points.tolist(), "G_prime": s.G_prime.tolist(), "C": s.C.tolist(),
                "P": int(s.P), "crossing": bool(s.crossing), "offsets": s.offsets.tolist(),
            }) + "\n")


def _records(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError("parse-error", f"{path}: line {lineno}: {exc.msg}") from None


def read_labels(path) -> list[MatchedSample]:
    out = []
    for lineno, rec in _records(path):
        try:
            out.append(MatchedSample(
                Ring(rec["R"]), np.asarray(rec["G_prime"], dtype=np.float64), np.asarray(rec["C"], dtype=np.int8),
                int(rec["P"]), bool(rec.get("crossing", False)), int(rec["class_id"]),
                int(rec["instance_id"]), int(rec["ring"])))
        except (KeyError, PolytraceError, ValueError) as exc:
            raise FormatError("parse-error", f"{path}: line {lineno}: {exc}") from None
    return out


def write_scores(records: Iterable[tuple[int, int, Ring | None, PointScores]], path) -> None:
    """One line per ring: ``instance_id``, ``ring``, optional ``R``, ``offsets``, ``vertex_prob``."""
    with open(path, "w") as fh:
        for iid, ring_idx, R, s in records:
            rec = {"instance_id": int(iid), "ring": int(ring_idx)}
            if R is not None:
                rec["R"] = R.points.tolist()
            rec["offsets"] = s.offsets.tolist()
            rec["vertex_prob"] = s.vertex_prob.tolist()
            fh.write(_dump_line(rec) + "\n")


def read_scores(path) -> dict[tuple[int, int], PointScores]:
    out = {}
    for lineno, rec in _records(path):
        try:
            prob = rec["vertex_prob"]
            off = rec.get("offsets") or np.zeros((0, len(prob), 2))
            out[int(rec["instance_id"]), int(rec.get("ring", 0))] = PointScores(off, prob)
        except (KeyError, PolytraceError, ValueError) as exc:
            raise FormatError("parse-error", f"{path}: line {lineno}: {exc}") from None
    return out


# --- road graphs and reports -------------------------------------------------

def _node_id(tok: str):
    try:
        return int(tok)
    except ValueError:
        return tok


def read_graph(path) -> RoadGraph:
    """Plain text: ``node <id> <x> <y>`` and ``edge <id1> <id2> <length>`` lines; ``#`` comments."""
    nodes, edges = {}, []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split("#", 1)[0].split()
            if not parts:
                continue
            try:
                if parts[0] == "node" and len(parts) == 4:
                    nodes[_node_id(parts[1])] = (float(parts[2]), float(parts[3]))
                elif parts[0] == "edge" and len(parts) == 4:
                    edges.append((_node_id(parts[1]), _node_id(parts[2]), float(parts[3])))
                else:
                    raise ValueError(f"unrecognised record {line.strip()!r}")
            except ValueError as exc:
                raise FormatError("parse-error", f"{path}: line {lineno}: {exc}") from None
    return RoadGraph(nodes, edges)


def write_graph(graph: RoadGraph, path) -> None:
    with open(path, "w") as fh:
        for k, (x, y) in graph.nodes.items():
            fh.write(f"node {k} {x!r} {y!r}\n")
        for u, v, length in graph.edges:
            fh.write(f"edge {u} {v} {length!r}\n")


def write_report(report, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
