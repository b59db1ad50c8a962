"""Command-line interface: ``meshtucker <verb> ...``.

Verbs: compress, decompress, evaluate, sweep, compare, synth. Results go to
standard output (a JSON line or CSV), diagnostics to standard error.

Exit codes: 0 success, 2 invalid arguments or data, 3 I/O or format
failure, 4 infeasible rate target.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import codec, planning
from .exceptions import (
    AssetParseError,
    ContainerFormatError,
    MeshTuckerError,
    TopologyMismatchError,
    UnreachableRateError,
)
from .metrics import EVAL_CSV_HEADER, EVAL_CSV_VERSION, METRICS, evaluate
from .pca import (
    nearest_pca_components,
    pca_compress,
    pca_compression_ratio,
    pca_mean_overhead,
    pca_reconstruct,
)
from .rigid import apply_inverse_transforms
from .synth import KINDS, synthesize

logger = logging.getLogger("meshtucker")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4

SWEEP_CSV_VERSION = 1
SWEEP_CSV_HEADER = (
    "asset", "method", "strategy", "target_ss", "achieved_ss", "achieved_ss_total",
    "v", "f", "metric", "value", "error",
)
METHODS = ("hosvd", "pca")
SWEEP_STRATEGIES = ("diagonal", "iterative")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# -- argument helpers -----------------------------------------------------------


def _csv_list(allowed):
    def parse(text):
        items = [s.strip() for s in text.split(",") if s.strip()]
        bad = [s for s in items if s not in allowed]
        if not items or bad:
            raise argparse.ArgumentTypeError(
                f"expected a comma list drawn from {', '.join(allowed)}, got {text!r}"
            )
        return list(dict.fromkeys(items))
    return parse


def _ss_grid(text):
    try:
        grid = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SS grid {text!r}") from None
    if not grid:
        raise argparse.ArgumentTypeError("SS grid is empty")
    if any(not 0 <= s < 100 for s in grid):
        raise argparse.ArgumentTypeError("SS values must lie in [0, 100)")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise argparse.ArgumentTypeError("SS grid must be strictly increasing")
    return grid


def _int_pair(text):
    try:
        a, b = (int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two integers 'a,b', got {text!r}") from None
    return a, b


def _load(path):
    path = Path(path)
    if not path.exists():
        raise CliError(f"{path}: no such file or directory", EXIT_IO)
    return codec.load_animation(path)


def _add_plan_flags(p):
    p.add_argument("--delta", type=float, default=planning.DEFAULT_DELTA,
                   help="CR tolerance for candidate pairs (default %(default)s)")
    p.add_argument("--samples", type=int, default=planning.DEFAULT_SAMPLES,
                   help="samples per level of the iterative search (default %(default)s)")
    p.add_argument("--depth", type=int, default=planning.DEFAULT_DEPTH,
                   help="recursion limit of the iterative search (default %(default)s)")


# -- compress / decompress ------------------------------------------------------


def cmd_compress(args) -> int:
    anim = _load(args.input)
    prepared = codec.prepare(anim)
    if args.ranks is not None:
        target = None
    elif args.cr is not None:
        target = args.cr
    else:
        target = planning.cr_from_ss(args.ss)
    c = codec.encode(
        anim, target, args.strategy, args.metric, args.ds, args.delta, args.samples,
        args.depth, ranks=args.ranks, count_overhead=not args.tucker_only, prepared=prepared,
    )
    c.save(args.output)
    tucker_cr = planning.compression_ratio(c.v, c.f, c.K, c.F)
    total_cr = codec.measured_cr(c)
    record = {
        "v": c.v,
        "f": c.f,
        "vtf": c.v / c.f,
        "target_cr": target,
        "tucker_cr": tucker_cr,
        "tucker_ss": planning.space_savings(tucker_cr),
        "measured_cr": total_cr,
        "measured_ss": planning.space_savings(total_cr),
        "strategy": c.strategy,
        "metric": c.metric,
        "metric_value": prepared.error(c.v, c.f, c.metric),
        "bytes": len(c.to_bytes()),
    }
    print(json.dumps(record, sort_keys=True))
    return EXIT_OK


def cmd_decompress(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise CliError(f"{path}: no such file", EXIT_IO)
    c = codec.CompressedAnimation.load(path)
    verts = codec.decode(c)
    edges, faces = np.zeros((0, 2), dtype=np.int64), None
    if args.reference is not None:
        ref = _load(args.reference)
        if ref.vertices.dims != verts.dims:
            raise CliError(f"reference dims {ref.vertices.dims} differ from {verts.dims}",
                           EXIT_VALIDATION)
        edges, faces = ref.edges, ref.faces
    anim = codec.AnimationSequence(verts, edges, Path(args.output).stem, faces)
    if args.format == "obj-sequence":
        codec.save_obj_sequence(anim, args.output)
    else:
        codec.save_raw(anim, args.output)
    logger.info("decoded K=%d F=%d to %s", c.K, c.F, args.output)
    return EXIT_OK


# -- evaluate -------------------------------------------------------------------


def _load_reconstruction(path):
    path = Path(path)
    if path.is_file() and codec.is_container(path):
        verts = codec.decode(codec.CompressedAnimation.load(path))
        return codec.AnimationSequence(verts, name=path.stem), True
    return _load(path), False


def _same_edges(a, b):
    return len(a) == len(b) and np.array_equal(np.unique(np.sort(a, axis=1), axis=0),
                                               np.unique(np.sort(b, axis=1), axis=0))


def cmd_evaluate(args) -> int:
    original = _load(args.original)
    recon, from_container = _load_reconstruction(args.reconstructed)
    if original.vertices.dims != recon.vertices.dims:
        raise CliError(
            f"dims differ: {original.vertices.dims} vs {recon.vertices.dims}", EXIT_VALIDATION
        )
    out = io.StringIO()
    out.write(f"# meshtucker-evaluate v{EVAL_CSV_VERSION}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(EVAL_CSV_HEADER)
    status = EXIT_OK
    for name in args.metrics:
        try:
            if name == "msdm" and not from_container and not _same_edges(original.edges,
                                                                         recon.edges):
                raise TopologyMismatchError("edge sets of the two animations differ")
            (report,) = evaluate(original.vertices, recon.vertices, (name,), original.edges,
                                 original.faces)
        except TopologyMismatchError as exc:
            writer.writerow((name, "error", str(exc)))
            logger.error("%s: %s", name, exc)
            status = EXIT_VALIDATION
            continue
        writer.writerows(report.rows())
    sys.stdout.write(out.getvalue())
    return status


# -- sweep / compare ------------------------------------------------------------


def _fmt(x):
    return "" if x is None else repr(float(x))


def _sweep_asset(anim, sweep, plan_metric, delta, samples, depth, ds):
    """Rows for one asset; failures become rows with an error message."""
    name = anim.name
    K, F = anim.K, anim.F
    prepared = codec.prepare(anim)
    rows = []

    def emit(method, strategy, ss, achieved, total, v, f, recon, error=None):
        for metric in sweep["metrics"]:
            value = None
            err = error
            if err is None:
                try:
                    (report,) = evaluate(anim.vertices, recon, (metric,), anim.edges, anim.faces)
                    value = report.aggregate
                except MeshTuckerError as exc:
                    err = str(exc)
            rows.append((
                name, method, strategy, _fmt(ss),
                _fmt(None if achieved is None else planning.space_savings(achieved)),
                _fmt(None if total is None else planning.space_savings(total)),
                "" if v is None else str(v), "" if f is None else str(f),
                metric, _fmt(value), err or "",
            ))

    for ss in sweep["ss_grid"]:
        lam = planning.cr_from_ss(ss)
        if "hosvd" in sweep["methods"]:
            for strategy in sweep["strategies"]:
                try:
                    plan = prepared.plan(lam, strategy, plan_metric, delta, samples, depth)
                except (UnreachableRateError, RuntimeError, ValueError) as exc:
                    emit("hosvd", strategy, ss, None, None, None, None, None, str(exc))
                    continue
                total = plan.achieved_cr + codec.overhead_cr(K, F, ds)
                emit("hosvd", strategy, ss, plan.achieved_cr, total, plan.v, plan.f,
                     prepared.reconstruct(plan.v, plan.f))
        if "pca" in sweep["methods"]:
            p = nearest_pca_components(K, F, lam)
            achieved = pca_compression_ratio(p, K, F)
            total = (achieved + pca_mean_overhead(K, F)
                     + planning.transform_storage(F) / (3 * K * F))
            model = pca_compress(prepared.normalized, p)
            recon = apply_inverse_transforms(pca_reconstruct(model, (K, 3, F)),
                                             prepared.transforms)
            # PCA keeps p' key-frame components; reported in the f column.
            emit("pca", "-", ss, achieved, total, None, p, recon)
    return rows


def run_sweep(inputs, ss_grid, strategies=("diagonal",), metrics=("mse",), methods=METHODS,
              plan_metric="mse", delta=planning.DEFAULT_DELTA, samples=planning.DEFAULT_SAMPLES,
              depth=planning.DEFAULT_DEPTH, ds=4):
    """Sweep rows, sorted deterministically; ``inputs`` are animations or paths."""
    sweep = {"ss_grid": list(ss_grid), "strategies": list(strategies),
            "metrics": list(metrics), "methods": list(methods)}
    rows = []
    for item in inputs:
        anim = item if isinstance(item, codec.AnimationSequence) else _load(item)
        rows.extend(_sweep_asset(anim, sweep, plan_metric, delta, samples, depth, ds))
    method_order = {m: i for i, m in enumerate(METHODS)}
    strategy_order = {"-": -1, **{s: i for i, s in enumerate(SWEEP_STRATEGIES)}}
    metric_order = {m: i for i, m in enumerate(METRICS)}
    rows.sort(key=lambda r: (r[0], float(r[3]), method_order[r[1]], strategy_order[r[2]],
                             metric_order[r[8]]))
    return rows


def write_sweep_csv(rows, stream):
    stream.write(f"# meshtucker-sweep v{SWEEP_CSV_VERSION}\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    writer.writerows(rows)


def cmd_sweep(args) -> int:
    methods = METHODS if args.command == "compare" else args.methods
    rows = run_sweep(args.inputs, args.ss_grid, args.strategies, args.metrics, methods,
                     args.plan_metric, args.delta, args.samples, args.depth, args.ds)
    if args.output is None:
        write_sweep_csv(rows, sys.stdout)
    else:
        with open(args.output, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
        logger.info("wrote %d rows to %s", len(rows), args.output)
    return EXIT_OK


# -- synth ------------------------------------------------------------------------


def cmd_synth(args) -> int:
    anim = synthesize(args.kind, K=args.vertices, F=args.frames, ranks=args.ranks,
                      amplitude=args.amplitude, seed=args.seed, motion=not args.no_motion,
                      name=Path(args.output).stem)
    if args.format == "obj-sequence":
        codec.save_obj_sequence(anim, args.output)
    else:
        codec.save_raw(anim, args.output)
    logger.info("wrote %s animation K=%d F=%d to %s", args.kind, anim.K, anim.F, args.output)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshtucker",
                                     description="HO-SVD compression of mesh animations.")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="encode an animation into a container")
    p.add_argument("input")
    p.add_argument("output")
    rate = p.add_mutually_exclusive_group(required=True)
    rate.add_argument("--ss", type=float, help="target space savings in percent")
    rate.add_argument("--cr", type=float, help="target compression ratio")
    rate.add_argument("--ranks", type=_int_pair, metavar="V,F", help="explicit ranks")
    p.add_argument("--strategy", choices=SWEEP_STRATEGIES, default="diagonal")
    p.add_argument("--metric", choices=METRICS, default="mse")
    p.add_argument("--ds", type=int, choices=(4, 8), default=4,
                   help="bytes per stored value (default %(default)s)")
    p.add_argument("--tucker-only", action="store_true",
                   help="apply the target to the Tucker operator alone, "
                        "leaving transforms and header out")
    _add_plan_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode a container")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=("raw", "obj-sequence"), default="raw")
    p.add_argument("--reference", help="asset supplying the mesh connectivity")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("evaluate", help="distortion between two animations as CSV")
    p.add_argument("original")
    p.add_argument("reconstructed", help="animation or container")
    p.add_argument("--metrics", type=_csv_list(METRICS), default=["mse"])
    p.set_defaults(func=cmd_evaluate)

    for verb, help_text in (("sweep", "rate-distortion sweep"),
                            ("compare", "sweep HO-SVD against PCA")):
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("inputs", nargs="+")
        p.add_argument("--ss-grid", type=_ss_grid, default=[70.0, 85.0, 95.0])
        p.add_argument("--strategies", type=_csv_list(SWEEP_STRATEGIES), default=["diagonal"])
        p.add_argument("--metrics", type=_csv_list(METRICS), default=["mse"])
        if verb == "sweep":
            p.add_argument("--methods", type=_csv_list(METHODS), default=["hosvd"])
        p.add_argument("--plan-metric", choices=METRICS, default="mse",
                       help="metric driving the iterative strategy")
        p.add_argument("--ds", type=int, choices=(4, 8), default=4)
        p.add_argument("--output", help="CSV path (default: standard output)")
        _add_plan_flags(p)
        p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic animation")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("output")
    p.add_argument("--vertices", type=int, default=500)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--ranks", type=_int_pair, default=(6, 4), metavar="R1,R3")
    p.add_argument("--amplitude", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-motion", action="store_true", help="skip the rigid motion")
    p.add_argument("--format", choices=("raw", "obj-sequence"), default="raw")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except CliError as exc:
        logger.error("%s", exc)
        return exc.code
    except UnreachableRateError as exc:
        logger.error("infeasible target: %s", exc)
        return EXIT_INFEASIBLE
    except (ContainerFormatError, AssetParseError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except (MeshTuckerError, ValueError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    finally:
        logger.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
