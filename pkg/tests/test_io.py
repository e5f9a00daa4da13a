import json

import numpy as np
import pytest
from PIL import Image

from polytrace.errors import PolytraceError
from polytrace.geometry import PolygonWithHoles, Ring
from polytrace.io import (Feature, VectorLayer, read_graph, read_labels, read_mask, read_scores, read_vector_layer,
                          write_graph, write_labels, write_mask, write_scores, write_vector_layer)
from polytrace.metrics import RoadGraph
from polytrace.reform import match_to_ground_truth, reconstruct
from polytrace.tracer import PointScores

from conftest import noisy_square, random_rectilinear


def _layer(n, rng, transform=(0.0, 1.0, 0.0, 0.0, 0.0, 1.0)):
    feats = []
    for i in range(n):
        pts = noisy_square(rng, n=12, side=50) + rng.uniform(0, 1000, 2)
        hole = [(20, 20), (30, 20), (30, 30), (20, 30)] + pts.min(axis=0) if i % 3 == 0 else None
        poly = PolygonWithHoles(pts, [hole] if hole is not None else [])
        conf = [rng.random(len(r)).tolist() for r in poly.rings]
        feats.append(Feature(int(i % 4 + 1), poly, float(rng.random()), conf, {"instance_id": i}))
    return VectorLayer(feats, transform)


@pytest.mark.parametrize("transform", [(0, 1, 0, 0, 0, 1), (500000.0, 0.5, 0.0, 4200000.0, 0.0, -0.5)])
def test_vector_round_trip(tmp_path, transform):
    layer = _layer(100, np.random.default_rng(0), transform)
    path = tmp_path / "l.geojson"
    write_vector_layer(layer, path)
    back = read_vector_layer(path)
    assert back.transform == tuple(float(v) for v in transform)
    assert len(back.features) == 100
    for a, b in zip(layer.features, back.features):
        assert (a.class_id, a.score, a.vertex_conf, a.properties) == (b.class_id, b.score, b.vertex_conf, b.properties)
        for ra, rb in zip(a.polygon.rings, b.polygon.rings):
            assert np.abs(ra.points - rb.points).max() <= 2e-3 * max(1, 1 / abs(transform[1]))
    # writing what was read reproduces the file
    write_vector_layer(back, tmp_path / "again.geojson")
    assert (tmp_path / "again.geojson").read_bytes() == path.read_bytes()


def test_geojson_structure(tmp_path):
    layer = VectorLayer([Feature(2, PolygonWithHoles([(0, 0), (4, 0), (4, 4), (0, 4)], [[(1, 1), (2, 1), (2, 2)]]))],
                        (0, 1, 0, 0, 0, -1))
    write_vector_layer(layer, tmp_path / "a.geojson")
    doc = json.loads((tmp_path / "a.geojson").read_text())
    geom = doc["features"][0]["geometry"]
    ext, hole = (np.array(r) for r in geom["coordinates"])
    assert np.array_equal(ext[0], ext[-1])
    area = lambda r: 0.5 * np.sum(r[:-1, 0] * r[1:, 1] - r[1:, 0] * r[:-1, 1])
    assert area(ext) > 0 and area(hole) < 0  # right-hand rule in world space


def test_empty_layer(tmp_path):
    write_vector_layer(VectorLayer(), tmp_path / "e.geojson")
    assert read_vector_layer(tmp_path / "e.geojson").features == []
    (tmp_path / "f.geojson").write_text('{"type": "FeatureCollection", "features": []}')
    assert read_vector_layer(tmp_path / "f.geojson").features == []


def test_unsupported_geometry(tmp_path):
    doc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {}, "geometry": {"type": "LineString", "coordinates": [[0, 0], [1, 1]]}}]}
    (tmp_path / "x.geojson").write_text(json.dumps(doc))
    with pytest.raises(PolytraceError) as e:
        read_vector_layer(tmp_path / "x.geojson")
    assert e.value.code == "unsupported-geometry" and "LineString" in str(e.value)


def test_parse_error_location(tmp_path):
    (tmp_path / "bad.geojson").write_text('{"type": "FeatureCollection",\n "features": [}')
    with pytest.raises(PolytraceError) as e:
        read_vector_layer(tmp_path / "bad.geojson")
    assert e.value.code == "parse-error" and "line 2" in str(e.value)


def test_multipolygon_split(tmp_path):
    sq = [[0, 0], [2, 0], [2, 2], [0, 2], [0, 0]]
    doc = {"type": "FeatureCollection", "features": [{"type": "Feature", "properties": {"class_id": 3},
           "geometry": {"type": "MultiPolygon", "coordinates": [[sq], [[[x + 5, y] for x, y in sq]]]}}]}
    (tmp_path / "m.geojson").write_text(json.dumps(doc))
    feats = read_vector_layer(tmp_path / "m.geojson").features
    assert [f.class_id for f in feats] == [3, 3]


def test_invalid_transform():
    with pytest.raises(PolytraceError):
        VectorLayer([], (0, 1, 2, 0, 2, 4))


@pytest.mark.parametrize("suffix", [".png", ".pgm"])
def test_mask_round_trip(tmp_path, suffix):
    m = np.random.default_rng(0).integers(0, 256, (37, 53)).astype(np.uint8)
    write_mask(m, tmp_path / f"m{suffix}")
    assert np.array_equal(read_mask(tmp_path / f"m{suffix}"), m)


def test_pgm_all_zero(tmp_path):
    (tmp_path / "z.pgm").write_bytes(b"P5\n# comment\n5 5\n255\n" + bytes(25))
    m = read_mask(tmp_path / "z.pgm")
    assert m.shape == (5, 5) and not m.any()


def test_pgm_truncated(tmp_path):
    (tmp_path / "t.pgm").write_bytes(b"P5\n5 5\n255\n" + bytes(10))
    with pytest.raises(PolytraceError):
        read_mask(tmp_path / "t.pgm")


def test_unsupported_rasters(tmp_path):
    Image.fromarray(np.zeros((4, 4), np.uint16)).save(tmp_path / "a.png")
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "b.png")
    (tmp_path / "c.pgm").write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    for name in ("a.png", "b.png", "c.pgm"):
        with pytest.raises(PolytraceError) as e:
            read_mask(tmp_path / name)
        assert e.value.code == "unsupported-raster"


def test_labels_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    samples = []
    for i in range(5):
        g = random_rectilinear(rng)
        s = match_to_ground_truth(reconstruct(g + rng.normal(0, 1, g.shape), 5, 25), g)
        samples.append(type(s)(s.R, s.G_prime, s.C, s.P, s.crossing, 1, i, 0))
    write_labels(samples, tmp_path / "l.jsonl")
    back = read_labels(tmp_path / "l.jsonl")
    for a, b in zip(samples, back):
        assert a.R == b.R and np.array_equal(a.G_prime, b.G_prime) and np.array_equal(a.C, b.C)
        assert (a.P, a.instance_id) == (b.P, b.instance_id)
    rec = json.loads((tmp_path / "l.jsonl").read_text().splitlines()[0])
    assert np.allclose(rec["offsets"], samples[0].offsets)


def test_scores_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    recs = [(i, k, None, PointScores(rng.normal(size=(2, 9, 2)), rng.random(9))) for i in range(3) for k in range(2)]
    write_scores(recs, tmp_path / "s.jsonl")
    back = read_scores(tmp_path / "s.jsonl")
    for i, k, _, s in recs:
        assert np.array_equal(back[i, k].offsets, s.offsets)
        assert np.array_equal(back[i, k].vertex_prob, s.vertex_prob)


def test_graph_round_trip(tmp_path):
    g = RoadGraph({1: (0.0, 0.5), 2: (10.25, 3.0), "c": (1.0, 1.0)}, [(1, 2, 11.5), (2, "c", 3.0)])
    write_graph(g, tmp_path / "g.txt")
    back = read_graph(tmp_path / "g.txt")
    assert back.nodes == g.nodes and back.edges == g.edges


def test_graph_parse_error(tmp_path):
    (tmp_path / "g.txt").write_text("node 1 0 0\nvertex 2 1 1\n")
    with pytest.raises(PolytraceError) as e:
        read_graph(tmp_path / "g.txt")
    assert "line 2" in str(e.value)
