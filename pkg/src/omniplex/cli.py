"""Command-line entry point ``omniplex``.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import experiments, presets
from .embed import abar_embed, ase_embed_each, omni_embed, omnibar
from .errors import InvalidArgument, NumericalError, ValidationError
from .graphio import read_graph, write_dense_csv, write_edge_list
from .model import _as_stack, sample_multiplex
from .rng import stream
from .scaling import scaling_matrices

log = logging.getLogger("omniplex")


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _matrix_csv(mat):
    return "".join(",".join("%.9g" % v for v in row) + "\n" for row in np.atleast_2d(mat))


def cmd_presets(args):
    lines = []
    for name, (_, grid_arg, desc) in presets.PRESETS.items():
        grid = f"grid over {grid_arg}" if grid_arg else "no grid"
        lines.append(f"{name:10s} {grid:12s} {desc}\n")
    _emit("".join(lines), args.out)


def cmd_sample(args):
    params = presets.get_preset(args.preset, args.value, args.n)
    sample = sample_multiplex(params, stream(args.seed))
    prefix = args.out or "graph"
    writer = write_edge_list if args.format == "edgelist" else write_dense_csv
    for g, a in enumerate(sample.a):
        writer(f"{prefix}_g{g + 1}.csv", a)
    np.savetxt(f"{prefix}_labels.csv", sample.labels + 1, fmt="%d")
    print(f"wrote {sample.m} graphs on {sample.n} vertices with prefix {prefix!r}")


def cmd_embed(args):
    a = _as_stack([read_graph(p) for p in args.graphs])
    if args.method == "omni":
        coords = omni_embed(a, args.d).coords
    elif args.method == "omnibar":
        coords = omnibar(omni_embed(a, args.d))
    elif args.method == "abar":
        coords = abar_embed(a, args.d).coords
    else:
        coords = np.concatenate([res.coords for res in ase_embed_each(a, args.d)])
    _emit(_matrix_csv(coords), args.out)


def cmd_scaling(args):
    if args.weights is not None:
        c = np.asarray(json.loads(args.weights), dtype=float)
    else:
        c = presets.get_preset(args.preset, args.value, 100).c_diag
    s = scaling_matrices(c).s_diag
    _emit(_matrix_csv(s), args.out)


def cmd_test(args):
    report = experiments.run_two_graph_test(args.graphs, args.d, args.alpha, args.kind, args.c_n)
    _emit(report.to_json(indent=2) + "\n", args.out)
    print(report.summary(), file=sys.stderr)


def cmd_experiment(args):
    data = {}
    if args.config:
        with open(args.config) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidArgument(f"{args.config}: invalid JSON ({exc})") from None
    data["kind"] = args.kind
    overrides = {"preset": args.preset, "grid": args.grid, "n": args.n, "reps": args.reps, "seed": args.seed,
                 "alpha": args.alpha, "d": args.d, "out": args.out}
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.noise_free:
        data["noise_free"] = True
    if args.paper_scale:
        data["paper_scale"] = True
        if args.reps is None:
            data.pop("reps", None)
    cfg = experiments.ExperimentConfig.from_dict(data)
    rows = experiments.run_experiment(cfg, args.threads)
    _emit(experiments.rows_to_csv(rows), cfg.out)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master random seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: $OMNIPLEX_THREADS or 1)")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--config", default=None, help="JSON experiment configuration")
    common.add_argument("--log-level", default="WARNING")

    parser = argparse.ArgumentParser(prog="omniplex", description="Joint spectral embedding of multiplex networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", parents=[common], help="list named model presets")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("sample", parents=[common], help="sample a multiplex graph from a preset")
    p.add_argument("--preset", required=True)
    p.add_argument("--value", type=float, default=None, help="grid value (c or t) for the preset")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--format", choices=["dense", "edgelist"], default="dense")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("embed", parents=[common], help="embed graph files")
    p.add_argument("graphs", nargs="+")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--method", choices=["omni", "omnibar", "ase", "abar"], default="omni")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("scaling", parents=[common], help="print scaling diagonals, one row per graph")
    p.add_argument("--preset", default="eq4")
    p.add_argument("--value", type=float, default=None)
    p.add_argument("--weights", default=None, help="JSON list of per-graph weight diagonals")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("test", parents=[common], help="test equal weighting of two graphs")
    p.add_argument("graphs", nargs=2)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--kind", choices=["What", "Wtilde"], default="What")
    p.add_argument("--c-n", dest="c_n", type=int, default=None)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo study, CSV output")
    p.add_argument("kind", choices=experiments.KINDS)
    p.add_argument("--preset", default=None)
    p.add_argument("--grid", type=float, nargs="+", default=None)
    p.add_argument("--n", type=int, nargs="+", default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--noise-free", action="store_true")
    p.add_argument("--paper-scale", action="store_true", help="use the large publication-scale replicate counts")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    if args.seed is None and args.command != "experiment":
        args.seed = 0
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
