import json
import subprocess
import sys

import numpy as np
import pytest

from polytrace.cli import main
from polytrace.contours import rasterize_polygons
from polytrace.geometry import PolygonWithHoles
from polytrace.io import read_vector_layer, write_mask

from conftest import random_rectilinear


@pytest.fixture
def square_mask(tmp_path):
    m = np.zeros((120, 120), np.uint8)
    m[10:110, 10:110] = 1
    path = tmp_path / "mask.png"
    write_mask(m, path)
    return path


def _mask_file(tmp_path, seed=0, n=9):
    rng = np.random.default_rng(seed)
    m = np.zeros((360, 360), np.uint8)
    for i in range(n):
        r, c = divmod(i, 3)
        p = random_rectilinear(rng, min_edge=20, max_cols=3, spread=10, margin=0) + [c * 120 + 5, r * 120 + 5]
        m = np.maximum(m, rasterize_polygons([(1 + i % 2, PolygonWithHoles(p))], m.shape))
    path = tmp_path / f"m{seed}.png"
    write_mask(m, path)
    return path


def test_trace_square(tmp_path, square_mask):
    out = tmp_path / "out.geojson"
    assert main(["trace", "--mask", str(square_mask), "--out", str(out), "--jobs", "1"]) == 0
    doc = json.loads(out.read_text())
    (feat,) = doc["features"]
    assert len(feat["geometry"]["coordinates"][0]) == 5  # 4 vertices, closed
    assert feat["properties"]["class_id"] == 1


def test_trace_rerun_byte_identical(tmp_path):
    mask = _mask_file(tmp_path)
    a, b = tmp_path / "a.geojson", tmp_path / "b.geojson"
    assert main(["trace", "--mask", str(mask), "--out", str(a), "--jobs", "1"]) == 0
    assert main(["trace", "--mask", str(mask), "--out", str(b), "--jobs", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_file_scorer_round_trip(tmp_path):
    mask = _mask_file(tmp_path, 1)
    a, b, s = tmp_path / "a.geojson", tmp_path / "b.geojson", tmp_path / "s.jsonl"
    assert main(["trace", "--mask", str(mask), "--out", str(a), "--jobs", "1", "--dump-scores", str(s)]) == 0
    assert main(["trace", "--mask", str(mask), "--out", str(b), "--jobs", "1", "--scorer", f"file:{s}"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_eval_self(tmp_path):
    mask = _mask_file(tmp_path, 2)
    layer, report = tmp_path / "l.geojson", tmp_path / "r.json"
    assert main(["trace", "--mask", str(mask), "--out", str(layer), "--jobs", "1"]) == 0
    assert main(["eval", "--pred", str(layer), "--gt", str(layer), "--report", str(report)]) == 0
    r = json.loads(report.read_text())
    assert (r["polis"], r["ciou"], r["iou"], r["f1"], r["ap"]) == (0, 100, 100, 100, 100)


def test_eval_with_graphs(tmp_path, square_mask):
    layer, report = tmp_path / "l.geojson", tmp_path / "r.json"
    main(["trace", "--mask", str(square_mask), "--out", str(layer), "--jobs", "1"])
    (tmp_path / "g.txt").write_text("node 1 0 0\nnode 2 10 0\nedge 1 2 10\n")
    (tmp_path / "p.txt").write_text("node 1 0 0\nnode 2 10 0\nedge 1 2 12\n")
    rc = main(["eval", "--pred", str(layer), "--gt", str(layer), "--metrics", "apls", "--graph-gt",
               str(tmp_path / "g.txt"), "--graph-pred", str(tmp_path / "p.txt"), "--report", str(report)])
    assert rc == 0
    r = json.loads(report.read_text())
    assert r["apls"] == pytest.approx(80) and r["polis"] is None


def test_mcr_label(tmp_path):
    mask = _mask_file(tmp_path, 3)
    layer, labels = tmp_path / "gt.geojson", tmp_path / "labels.jsonl"
    main(["trace", "--mask", str(mask), "--out", str(layer), "--jobs", "1"])
    assert main(["mcr-label", "--mask", str(mask), "--gt", str(layer), "--out", str(labels)]) == 0
    recs = [json.loads(line) for line in labels.read_text().splitlines()]
    assert len(recs) == 9
    assert all(len(r["R"]) == len(r["G_prime"]) == len(r["C"]) for r in recs)


@pytest.mark.parametrize("stride", ["40", "25"])
def test_pyramid_slice_stitch(tmp_path, stride):
    m = np.random.default_rng(4).integers(0, 5, (100, 90)).astype(np.uint8)
    src = tmp_path / "src.png"
    write_mask(m, src)
    d, out = tmp_path / "tiles", tmp_path / "out.png"
    assert main(["pyramid-slice", "--image", str(src), "--rates", "1,3,6", "--window", "40", "--stride", stride,
                 "--kind", "mask", "--out-dir", str(d)]) == 0
    assert main(["pyramid-stitch", "--manifest", str(d / "manifest.json"), "--out", str(out)]) == 0
    assert out.read_bytes() == src.read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert main(["trace", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main(["trace", "--mask", str(tmp_path / "nope.png"), "--out", str(tmp_path / "o")]) == 1
    (tmp_path / "bad.geojson").write_text("{not json")
    assert main(["eval", "--pred", str(tmp_path / "bad.geojson"), "--gt", str(tmp_path / "bad.geojson"),
                 "--report", str(tmp_path / "r.json")]) == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["eval", "--pred", "x", "--gt", "y", "--metrics", "polis,bleu", "--report", "r"]) == 1


def test_module_entry_point(tmp_path, square_mask):
    out = tmp_path / "o.geojson"
    res = subprocess.run([sys.executable, "-m", "polytrace", "trace", "--mask", str(square_mask), "--out", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert len(read_vector_layer(out).features) == 1
