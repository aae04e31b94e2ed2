"""Command-line driver.

Subcommands: hetero, relax, diagnose, competitor, all.
Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, default_config, load_config
from .field2d import CheckpointError, RelaxError
from .hetero1d import ConnectionSolveError
from . import runner

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="triodlab",
        description="Triple-junction laboratory: connection solves, field "
                    "relaxation, and sharp-interface diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("hetero", "solve the three 1D connections and their spectra"),
        ("relax", "relax the 2D field from the competitor or a checkpoint"),
        ("diagnose", "run all diagnostics on a relaxed checkpoint"),
        ("competitor", "build the competitor field and its energy table"),
        ("all", "full pipeline: hetero, competitor, relax, diagnose"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", help="YAML run configuration "
                                        "(defaults to the built-in experiment)")
        p.add_argument("--out", help="output root directory "
                                     "(defaults to the config's out_dir)")
        if name in ("relax", "all"):
            p.add_argument("--resume", help="field checkpoint to continue from")
        if name == "diagnose":
            p.add_argument("--checkpoint",
                           help="field checkpoint to analyze "
                                "(defaults to the run's own)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "hetero":
            paths = runner.run_hetero(cfg, args.out)
        elif args.command == "competitor":
            paths = runner.run_competitor(cfg, args.out)
        elif args.command == "relax":
            paths, converged = runner.run_relax(cfg, args.out,
                                                resume=args.resume)
            if not converged:
                print(f"relaxation did not converge; best iterate written "
                      f"to {paths.run_dir}", file=sys.stderr)
                return EXIT_SOLVER
        elif args.command == "diagnose":
            paths = runner.run_diagnose(cfg, args.out,
                                        checkpoint=args.checkpoint)
        elif args.command == "all":
            paths, converged = runner.run_all(cfg, args.out,
                                              resume=args.resume)
            if not converged:
                print("relaxation did not converge", file=sys.stderr)
                return EXIT_SOLVER
        else:  # pragma: no cover
            return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConnectionSolveError, RelaxError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (CheckpointError, FileNotFoundError, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    print(paths.run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
