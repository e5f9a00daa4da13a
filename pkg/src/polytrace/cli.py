"""Command-line entry point: ``polytrace <command> ...``.

Exit status is 0 on success, 1 for bad input (arguments, files, geometry)
and 2 for unexpected internal failures.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from . import defaults
from .errors import PolytraceError
from .io import (VectorLayer, read_graph, read_mask, read_scores, read_vector_layer, write_labels,
                 write_mask, write_report, write_scores, write_vector_layer, read_image)
from .metrics import ALL_METRICS, evaluate
from .pyramid import PyramidConfig, export_groups, stitch_manifest
from .reform import make_training_labels
from .tracer import FileScorer, RuleScorer, TraceParams, reconstructed_rings, rule_based_scores, trace

log = logging.getLogger("polytrace")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _csv(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polytrace", description="Mask vectorization, label generation and vector-map evaluation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("trace", help="vectorize a class mask")
    t.add_argument("--mask", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epsilon", type=float, default=defaults.EPSILON)
    t.add_argument("--interval", type=float, default=defaults.INTERVAL)
    t.add_argument("--scorer", default="rule", help="'rule' or 'file:PATH'")
    t.add_argument("--angle-threshold", type=float, default=defaults.ANGLE_THRESHOLD_DEG, help="degrees")
    t.add_argument("--prob-threshold", type=float, default=defaults.PROB_THRESHOLD)
    t.add_argument("--iters", type=int, default=defaults.OFFSET_ITERS)
    t.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    t.add_argument("--jobs", type=int, default=None)
    t.add_argument("--dump-scores", metavar="PATH",
                   help="write reconstructed rings with rule-based scores as a score-file template")

    m = sub.add_parser("mcr-label", help="generate aligned training labels")
    m.add_argument("--mask", required=True)
    m.add_argument("--gt", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--epsilon", type=float, default=defaults.EPSILON)
    m.add_argument("--interval", type=float, default=defaults.INTERVAL)
    m.add_argument("--connectivity", type=int, choices=(4, 8), default=8)

    e = sub.add_parser("eval", help="evaluate a predicted layer against ground truth")
    e.add_argument("--pred", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--gt-mask")
    e.add_argument("--metrics", type=_csv(str), default=list(ALL_METRICS))
    e.add_argument("--graph-gt")
    e.add_argument("--graph-pred")
    e.add_argument("--apls-radius", type=float, default=defaults.APLS_RADIUS)
    e.add_argument("--report", required=True)

    s = sub.add_parser("pyramid-slice", help="cut aligned multi-scale window groups")
    s.add_argument("--image", required=True)
    s.add_argument("--rates", type=_csv(int), default=list(defaults.RATES_BUILDING))
    s.add_argument("--window", type=int, default=1000)
    s.add_argument("--stride", type=int, default=None, help="defaults to the window size")
    s.add_argument("--kind", choices=("image", "mask"), default="image")
    s.add_argument("--out-dir", required=True)

    st = sub.add_parser("pyramid-stitch", help="reassemble bottom-level patches")
    st.add_argument("--manifest", required=True)
    st.add_argument("--pred-dir")
    st.add_argument("--out", required=True)
    return p


def _cmd_trace(a) -> None:
    mask = read_mask(a.mask)
    theta = math.radians(a.angle_threshold)
    if a.scorer == "rule":
        scorer = RuleScorer(theta)
    elif a.scorer.startswith("file:"):
        scorer = FileScorer(read_scores(a.scorer[5:]))
    else:
        raise PolytraceError("invalid-scorer", f"unknown scorer {a.scorer!r}")
    params = TraceParams(a.epsilon, a.interval, a.iters, a.prob_threshold, a.connectivity)
    if a.dump_scores:
        write_scores(((iid, k, R, rule_based_scores(R, theta)) for iid, k, R in reconstructed_rings(mask, params)),
                     a.dump_scores)
    result = trace(mask, scorer, params, jobs=a.jobs)
    write_vector_layer(VectorLayer.from_traced(result.polygons), a.out)
    log.info("traced %d polygon(s), %d failure(s)", len(result.polygons), len(result.errors))


def _cmd_label(a) -> None:
    gt = [f.polygon for f in read_vector_layer(a.gt).features]
    batch = make_training_labels(read_mask(a.mask), gt, a.epsilon, a.interval, a.connectivity)
    write_labels(batch.samples, a.out)
    log.info("%d sample(s), %d skipped, %d crossing", len(batch.samples), batch.skipped, batch.crossings)


def _cmd_eval(a) -> None:
    unknown = set(a.metrics) - set(ALL_METRICS)
    if unknown:
        raise PolytraceError("invalid-metric", f"unknown metric(s): {', '.join(sorted(unknown))}")
    pred = read_vector_layer(a.pred).features
    gt = read_vector_layer(a.gt).features
    gt_mask = read_mask(a.gt_mask) if a.gt_mask else None
    graphs = {}
    if "apls" in a.metrics and a.graph_gt and a.graph_pred:
        graphs = dict(graph_gt=read_graph(a.graph_gt), graph_pred=read_graph(a.graph_pred))
    report = evaluate(
        [f.polygon for f in pred], [1.0 if f.score is None else float(f.score) for f in pred],
        [f.class_id for f in pred], [f.polygon for f in gt], [f.class_id for f in gt],
        gt_mask=gt_mask, metrics=a.metrics, apls_radius=a.apls_radius, **graphs)
    write_report(report, a.report)


def _cmd_slice(a) -> None:
    image = read_mask(a.image) if a.kind == "mask" else read_image(a.image)
    config = PyramidConfig(tuple(a.rates), a.window, a.stride or a.window)
    path = export_groups(image, config, a.out_dir, a.kind)
    log.info("wrote %s", path)


def _cmd_stitch(a) -> None:
    write_mask(stitch_manifest(a.manifest, a.pred_dir), a.out)


COMMANDS = {
    "trace": _cmd_trace,
    "mcr-label": _cmd_label,
    "eval": _cmd_eval,
    "pyramid-slice": _cmd_slice,
    "pyramid-stitch": _cmd_stitch,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (PolytraceError, OSError) as exc:
        print(f"polytrace {args.command}: {exc}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("internal error")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
