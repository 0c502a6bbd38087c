"""Command line entry point.

Exit codes: 0 success, 2 validation error, 3 numerical failure,
4 weight verification failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import (AssemblyError, ConvergenceError, NoEpsilonFound, QuadratureError,
                     WeightVerificationFailed)
from .experiment import (TASKS, ConfigError, ExperimentConfig, bundled_config,
                         check_terminal_bound, run_task)
from .io import NonFiniteOutput

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_WEIGHT = 0, 2, 3, 4

NUMERICAL_ERRORS = (np.linalg.LinAlgError, ConvergenceError, NoEpsilonFound, QuadratureError,
                    AssemblyError, NonFiniteOutput, ArithmeticError)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="degencontrol",
        description="Degenerate parabolic control experiments from key=value configs.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run",) + TASKS:
        helptext = "run the config's task" if name == "run" else f"run the {name} task"
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True,
                       help="path to a key=value config, or the name of a bundled one")
        p.add_argument("--out-dir", default=None, help="artifact directory (overrides out_dir)")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return parser


def _report(task, summary):
    if task == "sanity":
        for kind, param, err, order in summary["rows"]:
            print(f"{kind:5s} {param:.6g} error={err:.4e} order={order:.3f}")
    elif task == "verify-weights":
        for key, val in summary["diagnostics"].items():
            print(f"{key} = {val}")
    elif task == "carleman-sweep":
        print(f"thresholds (s, lambda) = {summary['thresholds']}")
    elif task == "control":
        for res in summary["results"]:
            print(f"penalty={res.penalty:g} cg_iters={res.cg_iterations} "
                  f"terminal_norm={res.terminal_norm:.4e} control_cost={res.control_cost:.4e}")
    elif task == "observability":
        flags = sum(p.flag for p in summary["probes"])
        print(f"max ratio = {max(r[3] for r in summary['rows']):.4e}; continuation flags = {flags}")
    for f in summary["files"]:
        print(f"wrote {f}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        path = Path(args.config)
        if not path.exists() and bundled_config(path.name).exists():
            path = bundled_config(path.name)
        cfg = ExperimentConfig.load(path)
        task = cfg.task if args.command == "run" else args.command
        if task is None:
            raise ConfigError("task", "required by the run subcommand")
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        _, summary = run_task(cfg, task, args.out_dir, args.seed, args.threads)
    except WeightVerificationFailed as exc:
        print(f"weight verification failed: {exc}", file=sys.stderr)
        return EXIT_WEIGHT
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    _report(task, summary)
    if task == "control" and not check_terminal_bound(cfg, summary):
        print("terminal norm above terminal_bound_relative", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
