"""Command-line entry point: reproducible experiments and simulators.

    argscape <experiment> [--seed N] [--replicates N] [--workers K]
                          [--param key=value ...] [--config file.json]
                          [--out DIR] [--raw]
    argscape simulate arg  --n 5 --rho 1 --genome 0:1 --seed 42 --out DIR
    argscape simulate walk --n 5 --rho 1 --genome 0:1 --variant smc ...
    argscape list

The environment variable ARGSCAPE_SEED overrides the master seed.  Exit
codes: 0 all assertions pass, 1 some assertion failed, 2 unknown
experiment, 3 invalid parameters, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .arg import sample_arg
from .experiments import EXPERIMENTS, run_experiment
from .newick import newick_encode
from .reporting import write_report
from .rng import RandomSource
from .walk import WalkVariant, sample_walk

DEFAULT_SEED = 20260810

# which parameter the --replicates knob controls, per experiment
_REPLICATE_PARAM = {
    "verify-daux": "markings",
    "verify-small-time": "trees",
    "verify-structure": "distinct_reps",
}


def _parse_param(text: str):
    if "=" not in text:
        raise ValueError(f"--param expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _parse_genome(text: str):
    try:
        a, b = text.split(":")
        return float(a), float(b)
    except Exception:
        raise ValueError(f"--genome expects a:b, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="argscape",
        description="simulate genealogies along a recombining genome and "
        "verify their closed-form statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list available experiments")

    for name, (_, defaults, description) in EXPERIMENTS.items():
        p = sub.add_parser(name, help=description)
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--replicates", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", default=None, help="output directory for report files")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--param", action="append", default=[],
                       help="override one parameter: key=value (JSON value)")
        p.add_argument("--raw", action="store_true",
                       help="also dump raw per-replicate values under out/raw/")
        p.set_defaults(experiment=name)

    sim = sub.add_parser("simulate", help="write one simulated artifact to disk")
    sim_sub = sim.add_subparsers(dest="artifact", required=True)
    for kind in ("arg", "walk"):
        p = sim_sub.add_parser(kind)
        p.add_argument("--n", type=int, default=5)
        p.add_argument("--rho", type=float, required=True)
        p.add_argument("--genome", type=_parse_genome, default=(0.0, 1.0))
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=".")
        if kind == "arg":
            p.add_argument("--style", choices=("gm", "hudson"), default="gm")
        else:
            p.add_argument("--variant", default="full",
                           help="full | smc | smc-prime | macs:K")
    return parser


def _resolve_seed(cli_seed, config_seed=None) -> int:
    env = os.environ.get("ARGSCAPE_SEED")
    if env is not None:
        return int(env)
    if cli_seed is not None:
        return cli_seed
    if config_seed is not None:
        return int(config_seed)
    return DEFAULT_SEED


def _run_experiment_command(args) -> int:
    config = {}
    if args.config:
        config = json.loads(Path(args.config).read_text())
        if config.get("experiment", args.experiment) != args.experiment:
            raise ValueError(
                f"config file is for {config['experiment']!r}, not {args.experiment!r}"
            )
    parameters = dict(config.get("parameters", {}))
    for item in args.param:
        key, value = _parse_param(item)
        parameters[key] = value
    replicates = args.replicates or config.get("replicates")
    if replicates is not None:
        if replicates <= 0:
            raise ValueError("replicates must be positive")
        key = _REPLICATE_PARAM.get(args.experiment, "reps")
        parameters[key] = int(replicates)
    seed = _resolve_seed(args.seed, config.get("master_seed"))
    workers = args.workers or int(config.get("workers", 1))
    outdir = args.out or config.get("output_dir")

    from . import experiments as _exp

    raw_sink = [] if args.raw else None
    token = _exp.enable_raw_capture(raw_sink) if args.raw else None
    try:
        report = run_experiment(args.experiment, seed, parameters, workers)
    finally:
        if token is not None:
            _exp.disable_raw_capture(token)
    for line in report.summary_lines():
        print(line)
    print(f"-- {'ALL PASS' if report.all_pass else 'FAILURES PRESENT'} "
          f"({report.wall_time:.1f}s, seed {seed})")
    if outdir:
        write_report(report, outdir)
        if raw_sink:
            rawdir = Path(outdir) / "raw"
            rawdir.mkdir(parents=True, exist_ok=True)
            import numpy as np

            for phase, fname, arr in raw_sink:
                np.savetxt(rawdir / f"phase-{phase:03d}-{fname}.csv",
                           arr, delimiter=",", fmt="%r")
    return 0 if report.all_pass else 1


def _simulate_command(args) -> int:
    a, b = args.genome
    if args.rho <= 0:
        raise ValueError(
            "rho must be > 0 (the dynamics are defined for positive rates; "
            "use a tiny value such as 1e-12 for the no-recombination limit)"
        )
    seed = _resolve_seed(args.seed)
    outdir = Path(args.out)
    rng = RandomSource(seed)
    if args.artifact == "arg":
        log = sample_arg(args.n, a, b, args.rho, rng, style=args.style)
        logs = outdir / "logs"
        logs.mkdir(parents=True, exist_ok=True)
        path = logs / f"arg-n{args.n}-seed{seed}.jsonl"
        path.write_text(log.to_jsonl())
        counts = log.particle_count_trajectory()
        print(f"wrote {path}")
        print(f"events={len(log.events)} splits={log.split_count} "
              f"max-particles={max(counts)} terminal-time={log.terminal_time:.4f}")
    else:
        variant = WalkVariant.parse(args.variant)
        tp = sample_walk(args.n, a, b, args.rho, variant, rng)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "treepath.json").write_text(json.dumps(tp.to_json_dict()) + "\n")
        trees_dir = outdir / "trees"
        trees_dir.mkdir(exist_ok=True)
        lines = ["index,interval_start,height"]
        edges = (tp.a,) + tp.breakpoints
        for i, tree in enumerate(tp.trees):
            (trees_dir / f"tree-{i:03d}.nwk").write_text(newick_encode(tree) + "\n")
            lines.append(f"{i},{edges[i]!r},{tree.root_time!r}")
        (outdir / "summary.csv").write_text("\n".join(lines) + "\n")
        print(f"wrote {outdir / 'treepath.json'} and {len(tp.trees)} trees")
        print(f"variant={variant} breakpoints={len(tp.breakpoints)} "
              f"candidate-splits={len(tp.source.split_marks())}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "list":
            for name, (_, defaults, description) in EXPERIMENTS.items():
                print(f"{name}: {description}")
                print(f"    defaults: {json.dumps(defaults)}")
            return 0
        if args.command == "simulate":
            return _simulate_command(args)
        return _run_experiment_command(args)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
