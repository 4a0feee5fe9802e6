"""Command line entry point: ``dssbo run | plot | inspect-structure``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import OPTIMIZERS, load_config
from .errors import ConfigError, ContractViolation

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 2, 3
OUTPUT_ROOT_ENV = "DSSBO_OUTPUT_ROOT"

log = logging.getLogger("dssbo")


def _seed_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed list {s!r}")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dssbo", description="Structure-learning Bayesian optimisation runs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file")
    run.add_argument("config")
    run.add_argument("--seeds", type=_seed_list)
    run.add_argument("--out")
    run.add_argument("--optimizer", choices=OPTIMIZERS)
    run.add_argument("--iterations", type=int)

    plot = sub.add_parser("plot", help="re-render CSV and SVG files from stored traces")
    plot.add_argument("trace_dir")

    insp = sub.add_parser("inspect-structure", help="summarise a detected dependency structure")
    insp.add_argument("trace_dir")
    return p


def _trace_dirs(root: Path) -> list[Path]:
    from .optimize import TRACE_FILE

    if (root / TRACE_FILE).exists():
        return [root]
    dirs = sorted((d for d in root.glob("seed_*") if (d / TRACE_FILE).exists()),
                  key=lambda d: int(d.name.split("_", 1)[1]))
    if not dirs:
        raise ContractViolation(f"no traces found under {root}")
    return dirs


def cmd_run(args) -> int:
    from .experiment import run_experiment

    try:
        cfg = load_config(args.config)
        if args.seeds is not None:
            cfg = cfg.override("experiment.seeds", args.seeds)
        if args.optimizer is not None:
            cfg = cfg.override("experiment.optimizer", args.optimizer)
        if args.iterations is not None:
            cfg = cfg.override("experiment.iterations", args.iterations)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg["experiment.output"]
    if not out:
        root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
        out = str(Path(root) / Path(args.config).stem)
    art = run_experiment(cfg, out)
    print(f"wrote {len(art.files)} files to {art.out_dir}")
    if not art.ok:
        print("one or more seeds aborted; partial artifacts kept", file=sys.stderr)
        return EXIT_RUN
    return EXIT_OK


def cmd_plot(args) -> int:
    from .optimize import read_trace
    from .render import render_outputs

    root = Path(args.trace_dir)
    traces = [read_trace(d) for d in _trace_dirs(root)]
    files = render_outputs(traces, root)
    for f in files:
        print(f)
    return EXIT_OK


def cmd_inspect(args) -> int:
    from .optimize import read_trace
    from .render import plot_heatmap

    for d in _trace_dirs(Path(args.trace_dir)):
        tr = read_trace(d)
        print(f"{d}: optimizer={tr.optimizer} seed={tr.seed} D={tr.D}")
        if tr.graph is None or tr.hessian_sums is None:
            print("  no structure phase recorded")
            continue
        sizes = [len(c) for c in tr.cliques] if tr.cliques else []
        print(f"  T0={tr.T0} C1={tr.C1} hessian queries={tr.hessian_queries} threshold={tr.threshold:.6g}")
        print(f"  edges={len(tr.graph)} cliques={len(sizes)} largest clique={max(sizes) if sizes else 0}")
        for a, b in tr.graph.edge_list()[:20]:
            print(f"    ({a}, {b})  |sum|={abs(tr.hessian_sums[a, b]):.6g}")
        if len(tr.graph) > 20:
            print(f"    ... {len(tr.graph) - 20} more")
        print(f"  heatmap: {plot_heatmap(tr, d / 'structure.svg')}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "plot":
            return cmd_plot(args)
        return cmd_inspect(args)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
