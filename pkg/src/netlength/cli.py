"""Command line interface.

Every subcommand is a pure function of its flags, input files and seed.
Exit codes: 0 success, 2 input or validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from .distance import neighbor_structure
from .estimators import LengthLFunction, NetworkKFunction, estimate_intensity, make_grid
from .lengthstat import DETECTION_RULES, extract_aggregation
from .montecarlo import STATISTICS, envelope
from .network import NetworkFormatError, load_network, load_points, validate, write_network, write_points
from .process import generate_csr
from .synth import case_spec, compose_case, make_network, maximal_mask, planted_linear
from .validation import check_positive

log = logging.getLogger("netlength")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class NumericFailure(RuntimeError):
    pass


def fmt(x) -> str:
    """Fixed 9-significant-digit rendering used for every numeric CSV field."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def _json_value(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    return x


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_value(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _check_finite(*arrays):
    for a in arrays:
        if a is not None and np.isnan(np.asarray(a, dtype=float)).any():
            raise NumericFailure("curve contains NaN values")


# ---------------------------------------------------------------------------
# shared input handling
# ---------------------------------------------------------------------------


def _network_paths(args):
    nodes, edges = args.nodes, args.edges
    if args.network is not None:
        base = Path(args.network)
        nodes = nodes or base / "nodes.csv"
        edges = edges or base / "edges.csv"
    if nodes is None or edges is None:
        raise ValueError("give --network DIR or both --nodes and --edges")
    return nodes, edges


def _load_network(args):
    net = load_network(*_network_paths(args))
    log.info("network: %d nodes, %d edges, total length %.6g", net.n_nodes, net.n_edges, net.total_length)
    return net


def _load_points(args, net):
    threshold = check_positive(args.snap_threshold, "--snap-threshold", allow_none=True)
    pts = load_points(args.points, net, threshold)
    log.info("points: %d", pts.n)
    if pts.n < 2:
        raise ValueError("need at least 2 points")
    return pts


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_network_args(p):
    p.add_argument("--network", help="directory holding nodes.csv and edges.csv")
    p.add_argument("--nodes", help="node CSV (node_id,x,y)")
    p.add_argument("--edges", help="edge CSV (edge_id,from_node,to_node,length)")


def _add_points_args(p):
    p.add_argument("--points", required=True, help="point CSV (point_id,edge_id,offset or point_id,x,y)")
    p.add_argument("--snap-threshold", type=float, default=None,
                   help="warn when a coordinate point snaps farther than this")


def _add_length_args(p):
    p.add_argument("--h-max", type=float, default=None, help="largest scale (default total/2)")
    p.add_argument("--h-step", type=float, default=None, help="scale step (default total/500)")
    p.add_argument("--intensity", choices=("global", "nn"), default="global")
    p.add_argument("--rule", choices=DETECTION_RULES, default="depth")
    p.add_argument("--depth-tolerance", type=float, default=0.4)
    p.add_argument("--prominence-threshold", type=float, default=0.2)


def _length_estimator(args) -> LengthLFunction:
    if args.h_step is not None and args.h_max is not None and args.h_step > args.h_max:
        raise ValueError("--h-step must not exceed --h-max")
    return LengthLFunction(
        h_step=args.h_step,
        h_max=args.h_max,
        intensity=args.intensity,
        rule=args.rule,
        depth_tolerance=args.depth_tolerance,
        prominence_threshold=args.prominence_threshold,
    )


def _curve_rows(curve):
    return curve.to_rows()


def _members_rows(pts, agg, labels):
    for i in agg.members:
        row = [pts.point_ids[i], pts.network.edge_ids[pts.edge[i]], pts.offset[i]]
        if labels is not None:
            row.append(str(int(labels[i])))
        yield row


def _write_extraction(out, pts, agg, labels, stem="extraction"):
    write_json(out / f"{stem}.json", agg.as_dict(pts.point_ids))
    header = ["point_id", "edge_id", "offset"] + (["label"] if labels is not None else [])
    write_csv(out / f"{stem}_members.csv", header, _members_rows(pts, agg, labels))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_analyze(args):
    net = _load_network(args)
    pts = _load_points(args, net)
    t0 = time.perf_counter()
    est = _length_estimator(args).fit(pts)
    curve = est.curve_
    _check_finite(curve.k_obs, curve.l_obs, curve.l_prime)
    log.info("curve: %d scales in %.2fs", curve.h.size, time.perf_counter() - t0)
    out = _out_dir(args.out)
    write_csv(out / "curve.csv", ["h", "k_obs", "k_expected", "l_obs", "l_prime"], _curve_rows(curve))
    report = est.scale_.as_dict()
    write_json(out / "detection.json", report)
    if est.scale_.detected:
        log.info("detected h_hat = %.6g", est.scale_.h_hat)
        if args.extract:
            _write_extraction(out, pts, est.aggregation_, pts.labels)
    else:
        log.info("no scale detected")
    return EXIT_OK


def cmd_envelope(args):
    net = _load_network(args)
    if args.runs < 2:
        raise ValueError("--runs must be at least 2")
    if args.n < 2:
        raise ValueError("--n must be at least 2")
    grid = make_grid(net, args.h_step, args.h_max)
    h = grid.values / 2 if args.statistic == "netK" else grid.values
    env = envelope(net, args.n, args.runs, h, args.statistic, args.seed, args.jobs)
    _check_finite(env.mean, env.lo, env.hi)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    col = "r" if args.statistic == "netK" else "h"
    write_csv(out, [col, "mean", "lo", "hi"], zip(env.h, env.mean, env.lo, env.hi))
    if args.runs_out:
        header = [col] + [f"run{k}" for k in range(env.runs.shape[0])]
        write_csv(args.runs_out, header, np.column_stack([env.h, env.runs.T]))
    log.info("envelope: %d runs of %d points", args.runs, args.n)
    return EXIT_OK


def cmd_extract(args):
    h_hat = check_positive(args.h_hat, "--h-hat")
    net = _load_network(args)
    pts = _load_points(args, net)
    rows, profiles = neighbor_structure(pts)
    lam = estimate_intensity(args.intensity, pts, rows)
    agg = extract_aggregation(pts, rows, profiles, lam, h_hat, args.normalize)
    out = _out_dir(args.out)
    _write_extraction(out, pts, agg, pts.labels)
    log.info("center %s, %d members", pts.point_ids[agg.center], agg.members.size)
    return EXIT_OK


def _run_method(method, pts, truth, args):
    if method == "lengthL":
        est = LengthLFunction(rule=args.rule, depth_tolerance=args.depth_tolerance,
                              prominence_threshold=args.prominence_threshold).fit(pts, truth)
        scale = est.scale_.h_hat
        curve = est.curve_
        rows = curve.to_rows()
        header = ["h", "k_obs", "k_expected", "l_obs", "l_prime"]
        detection = est.scale_.as_dict()
    else:
        est = NetworkKFunction(n_runs=args.runs, seed=args.seed + 1, n_jobs=args.jobs).fit(pts, truth)
        scale = est.r_hat_
        c = est.curves_
        rows = zip(c.r, c.observed, c.mean, c.lo, c.hi, c.deviation)
        header = ["r", "observed", "mean", "lo", "hi", "deviation"]
        detection = {"r_hat": scale, "detected": scale is not None}
    return est, scale, header, rows, detection


def _summary_entry(method, pts, est, scale):
    agg = est.aggregation_
    entry = {"method": method, "detected": scale is not None, "scale": scale}
    if agg is None:
        entry.update(center_point_id=None, precision=None, recall=None, result="no detection")
    else:
        entry.update(center_point_id=pts.point_ids[agg.center], n_members=int(agg.members.size),
                     precision=agg.precision, recall=agg.recall, result="detected")
    return entry


def cmd_case(args):
    spec = case_spec(args.case, args.seed)
    net, pts = compose_case(spec)
    truth = maximal_mask(spec, pts)
    out = _out_dir(args.out_dir)
    write_network(net, out / "nodes.csv", out / "edges.csv")
    write_points(pts.__class__(net, pts.edge, pts.offset, truth, pts.point_ids), out / "points.csv")
    methods = ("lengthL", "netK") if args.method == "both" else (args.method,)
    summary = {"case": spec.case_id, "seed": spec.seed, "n_points": pts.n,
               "total_length": net.total_length, "methods": {}}
    for method in methods:
        log.info("case %d: running %s", spec.case_id, method)
        est, scale, header, rows, detection = _run_method(method, pts, truth, args)
        write_csv(out / f"{method}_curve.csv", header, rows)
        write_json(out / f"{method}_detection.json", detection)
        if est.aggregation_ is not None:
            _write_extraction(out, pts, est.aggregation_, truth, stem=f"{method}_extraction")
        summary["methods"][method] = _summary_entry(method, pts, est, scale)
    write_json(out / "summary.json", summary)
    for method, entry in summary["methods"].items():
        print(f"case {spec.case_id} {method}: {entry['result']}"
              + ("" if entry["scale"] is None else f" scale={fmt(entry['scale'])}"))
    return EXIT_OK


def cmd_eval(args):
    rows = []
    for seed in range(args.seed, args.seed + args.seeds):
        spec = case_spec(args.case, seed)
        net, pts = compose_case(spec)
        truth = maximal_mask(spec, pts)
        est, scale, *_ = _run_method(args.method, pts, truth, args)
        rows.append(_summary_entry(args.method, pts, est, scale) | {"seed": seed})
        log.info("seed %d: %s", seed, rows[-1]["result"])
    scales = np.array([np.nan if r["scale"] is None else r["scale"] for r in rows])

    def med(key):
        v = [r[key] for r in rows if r.get(key) is not None]
        return float(np.median(v)) if v else None

    summary = {
        "case": args.case,
        "method": args.method,
        "seeds": args.seeds,
        "detection_rate": float(np.mean(np.isfinite(scales))),
        "median_scale": float(np.nanmedian(scales)) if np.isfinite(scales).any() else None,
        "median_precision": med("precision"),
        "median_recall": med("recall"),
        "runs": rows,
    }
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        write_json(args.out, summary)
    print(json.dumps(_json_value({k: v for k, v in summary.items() if k != "runs"}), sort_keys=True))
    return EXIT_OK


def cmd_validate(args):
    net = _load_network(args)
    report = validate(net)
    print(json.dumps(_json_value(report.as_dict()), indent=2, sort_keys=True))
    return EXIT_OK if report.valid else EXIT_INPUT


def cmd_generate(args):
    out = _out_dir(args.out_dir)
    if args.case is not None:
        spec = case_spec(args.case, args.seed)
        net, pts = compose_case(spec)
        pts = pts.__class__(net, pts.edge, pts.offset, maximal_mask(spec, pts), pts.point_ids)
    else:
        sizes = json.loads(args.sizes) if args.sizes else {}
        if not isinstance(sizes, dict):
            raise ValueError("--sizes must be a JSON object")
        net = make_network(args.pattern, **sizes)
        if args.plant_length is not None:
            pts = planted_linear(net, args.seed, args.plant_length, args.plant_count, args.n)
        else:
            pts = generate_csr(net, args.n, args.seed) if args.n else None
    write_network(net, out / "nodes.csv", out / "edges.csv")
    if pts is not None:
        write_points(pts, out / "points.csv")
    log.info("wrote network with %d edges%s", net.n_edges, "" if pts is None else f" and {pts.n} points")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netlength", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log every stage")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="length K/L curves and scale detection")
    _add_network_args(p)
    _add_points_args(p)
    _add_length_args(p)
    p.add_argument("--extract", action="store_true", help="also write the extracted aggregation")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("envelope", help="CSR Monte Carlo envelope")
    _add_network_args(p)
    p.add_argument("--n", type=int, required=True, help="points per simulated dataset")
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--statistic", choices=sorted(STATISTICS), default="lengthL")
    p.add_argument("--h-max", type=float, default=None)
    p.add_argument("--h-step", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default $NETLENGTH_THREADS)")
    p.add_argument("--runs-out", default=None, help="optional wide CSV with every run")
    p.add_argument("--out", required=True, help="envelope CSV path")
    p.set_defaults(func=cmd_envelope)

    p = sub.add_parser("extract", help="extract the aggregation at a given scale")
    _add_network_args(p)
    _add_points_args(p)
    p.add_argument("--h-hat", type=float, required=True)
    p.add_argument("--intensity", choices=("global", "nn"), default="global")
    p.add_argument("--normalize", action="store_true", help="drop the 1/n factor of local L")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extract)

    for name, func, helptext in (
        ("case", cmd_case, "generate a synthetic case and analyze it"),
        ("eval", cmd_eval, "multi-seed summary for a synthetic case"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--case", type=int, required=True, choices=(1, 2, 3, 4))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--runs", type=int, default=10, help="CSR runs for the netK envelope")
        p.add_argument("--jobs", type=int, default=None)
        p.add_argument("--rule", choices=DETECTION_RULES, default="depth")
        p.add_argument("--depth-tolerance", type=float, default=0.4)
        p.add_argument("--prominence-threshold", type=float, default=0.2)
        if name == "case":
            p.add_argument("--method", choices=("lengthL", "netK", "both"), default="both")
            p.add_argument("--out-dir", required=True)
        else:
            p.add_argument("--method", choices=("lengthL", "netK"), default="lengthL")
            p.add_argument("--seeds", type=int, default=20)
            p.add_argument("--out", default=None, help="JSON file with per-seed results")
        p.set_defaults(func=func)

    p = sub.add_parser("validate", help="network validation report")
    _add_network_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a synthetic network, CSR points or a case")
    p.add_argument("--pattern", choices=("grid", "radial", "hybrid", "urban"), default="hybrid")
    p.add_argument("--sizes", default=None, help='generator parameters as JSON, e.g. \'{"rows": 5}\'')
    p.add_argument("--n", type=int, default=0, help="CSR points to place")
    p.add_argument("--plant-length", type=float, default=None,
                   help="plant a linear aggregation of this length on the network's marked edge")
    p.add_argument("--plant-count", type=int, default=150)
    p.add_argument("--case", type=int, choices=(1, 2, 3, 4), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.ERROR if args.quiet else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            return args.func(args)
    except NetworkFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
