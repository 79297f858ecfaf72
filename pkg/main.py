# main.py
"""Command-line entry point: solve | bench | oracle-check | synth.

    python main.py synth --family eeg --seed 3 --out bundles/eeg3
    python main.py solve --instance bundles/eeg3 --solver pfdr --stop rel-evol=1e-6
    python main.py bench --instance bundles/eeg3 --levels rel-evol=1e-4,rel-evol=1e-6
    python main.py oracle-check

Flag defaults can come from a --config file of `key = value` lines (keys are the flag
names, dashes or underscores); flags given on the command line win.

Exit status: 0 ok, 2 malformed input (bad flags, bundle files, config files), 3 refused
hypothesis or a solve that left the smooth term's domain ("iteration k: ..."), 4 failed
oracle check.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Callable, Dict, List, Optional

from config import env_loader
from config.errors import InvalidInputError, SolverSuiteError
from pipelines.bench import cmd_bench
from pipelines.oracle_check import cmd_oracle_check
from pipelines.solve import SOLVERS, cmd_solve
from pipelines.synth import FAMILIES, cmd_synth

LOG_LEVEL = env_loader.get("PFDR_LOG_LEVEL", "WARNING")

COMMANDS: Dict[str, Callable[[argparse.Namespace], dict]] = {
    "solve": cmd_solve,
    "bench": cmd_bench,
    "oracle-check": cmd_oracle_check,
    "synth": cmd_synth,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file with flag defaults")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--verbose", "-v", action="count", default=0)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", help="instance bundle directory")
    p.add_argument("--stop", help="rel-evol=<x> | max-evol=<x> | iters=<n>")
    p.add_argument("--rho", type=float, help="relaxation parameter (default: inside the admissible range)")
    p.add_argument("--eta", type=float, help="step-size fraction of 2/L")
    p.add_argument("--gamma-mode", choices=("strict", "jacobi"), help="EEG-family curvature model")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--inject-errors", metavar="C,S", help="perturbations of norm C/k^S")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfdr", description="Preconditioned splitting solvers on graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one solver on an instance bundle")
    _common(p)
    _solver_flags(p)
    p.add_argument("--solver", choices=SOLVERS, default="pfdr")

    p = sub.add_parser("bench", help="compare pfdr, pgfb and ppd against a reference run")
    _common(p)
    _solver_flags(p)
    p.add_argument("--levels", help="comma-separated stop rules of one kind")
    p.add_argument("--reference-iters", type=int)

    p = sub.add_parser("oracle-check", help="brute-force verification suite")
    _common(p)
    p.add_argument("--checks", help="comma-separated check names (default: all)")
    p.add_argument("--count", type=int, help="instances per check")

    p = sub.add_parser("synth", help="write a seeded synthetic instance bundle")
    _common(p)
    p.add_argument("--family", choices=FAMILIES, default="eeg")
    p.add_argument("--vertices", type=int)
    p.add_argument("--observations", type=int)
    p.add_argument("--support", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--labels", type=int)
    p.add_argument("--flip", type=float)
    p.add_argument("--beta", type=float)
    return parser


def _with_config(argv: List[str]) -> List[str]:
    """Insert --config values as flags right after the subcommand, so flags typed on the
    command line (parsed later) override them and argparse converts and validates them."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        values = env_loader.load_config_file(known.config)
    except (FileNotFoundError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"config file {known.config}: {exc}") from exc
    at = next((i for i, tok in enumerate(argv) if tok in COMMANDS), None)
    if at is None:
        return argv
    extra: List[str] = []
    for key, value in values.items():
        flag = "--" + key.strip().lower().replace("_", "-")
        if flag == "--config":
            continue
        extra.append(f"{flag}={value}")
    return argv[:at + 1] + extra + argv[at + 1:]


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_with_config(argv))
        level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else LOG_LEVEL.upper()
        logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
        report = COMMANDS[args.command](args)
    except SolverSuiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(report, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
