"""Command-line entry point: ``peerhood <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys

from ..errors import DegeneratePaymentError, PeerhoodError, SolverError
from .config import ConfigError, ExperimentConfig
from .records import emit
from .runners import run

SUBCOMMANDS = {
    "perturb-agent": "perturbation_agent",
    "perturb-center": "perturbation_center",
    "bin-sweep": "bin_size_sweep",
    "converge": "convergence",
    "check-pi": "check_pi",
    "check-pe": "check_pe",
    "pi-demo": "pi_impossibility_demo",
}

# exit codes by error class
EXIT_CODES = {ConfigError: 2, DegeneratePaymentError: 3, SolverError: 4, OSError: 5}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peerhood", description="Peer neighbourhood mechanism experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, experiment in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=experiment.replace("_", " "))
        p.add_argument("--config", help="JSON file mirroring ExperimentConfig")
        p.add_argument("--seed", type=int, help="experiment seed")
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="json")
        p.add_argument("--theta-samples", type=int, help="partition shift samples")
        p.add_argument("--peers", type=int, help="peer reports for center-side estimates")
        p.add_argument("--dim", type=int, choices=(1, 2))
        p.add_argument("--kind", choices=("empirical", "gmm"), help="distribution family")
        p.add_argument("--workers", type=int, help="worker threads (output does not depend on it)")
        p.add_argument("--timestamp", action="store_true", help="record the wall-clock time in the output")
        p.set_defaults(experiment=experiment)
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data = ExperimentConfig.load(args.config).to_dict()
    data["experiment"] = args.experiment
    for flag, key in (("seed", "seed"), ("dim", "dim"), ("workers", "workers")):
        if getattr(args, flag) is not None:
            data[key] = getattr(args, flag)
    if args.timestamp:
        data["timestamps"] = True
    grids = dict(data.get("grids", {}))
    if args.theta_samples is not None:
        grids["theta_samples"] = args.theta_samples
    if args.peers is not None:
        grids["peers"] = args.peers
    if grids:
        data["grids"] = grids
    if args.kind is not None:
        data["distribution"] = {**data.get("distribution", {}), "kind": args.kind}
    if args.seed is not None and args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        record = run(cfg)
        text = emit(record, args.out, args.format)
        if args.out == "-":
            sys.stdout.write(text)
    except (PeerhoodError, OSError, ValueError) as exc:
        code = next((c for cls, c in EXIT_CODES.items() if isinstance(exc, cls)), 1)
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
