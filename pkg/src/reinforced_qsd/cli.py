"""Command-line entry point: ``reinforced-qsd <command> ...``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ExperimentConfig, load_config
from .errors import ReinforcedQSDError
from .runner import run_experiment


def build_parser():
    p = argparse.ArgumentParser(prog="reinforced-qsd",
                                description="Reinforced absorbed processes and their QSDs.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run diffusion replicas from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override master_seed")
    s.add_argument("--jobs", type=int, help="parallel replicas (default: logical cores)")
    s.add_argument("--out", help="override output_dir")

    f = sub.add_parser("finite-lab", help="simulate the reinforced chain of a chain file")
    f.add_argument("--chain", required=True)
    f.add_argument("--cycles", type=int, required=True)
    f.add_argument("--replicas", type=int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--jobs", type=int)
    f.add_argument("--out", default="results/finite-lab")

    v = sub.add_parser("verify", help="check identities and rate bounds on a chain file")
    v.add_argument("--chain", required=True)
    v.add_argument("--nmax", type=int, default=30)
    v.add_argument("--tmax", type=float)
    v.add_argument("--out", default="results/verify")

    b = sub.add_parser("benchmark", help="finite-difference check of a closed-form QSD")
    b.add_argument("--name", required=True, choices=["bm-interval", "bm-disk"])
    b.add_argument("--grid", type=int, required=True)
    b.add_argument("--out", default="results/benchmark")
    return p


def _config_from_args(args):
    if args.command == "simulate":
        cfg = load_config(args.config)
        if cfg.command != "simulate":
            raise ReinforcedQSDError(f"{args.config} is a {cfg.command!r} config")
        if args.seed is not None:
            cfg.master_seed = args.seed
        return cfg, args.out
    if args.command == "finite-lab":
        cfg = ExperimentConfig(command="finite-lab", chain=args.chain, n_cycles=args.cycles,
                               replicas=args.replicas, master_seed=args.seed,
                               output_dir=args.out)
    elif args.command == "verify":
        cfg = ExperimentConfig(command="verify", chain=args.chain, n_max=args.nmax,
                               t_max=args.tmax, output_dir=args.out)
    else:
        cfg = ExperimentConfig(command="benchmark", model=args.name, grid=args.grid,
                               output_dir=args.out)
    # flags with defaults are not overrides: the environment variable still applies
    return cfg, None


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, out = _config_from_args(args)
        if args.command in ("finite-lab", "verify", "benchmark"):
            for name, lo in (("cycles", 1), ("replicas", 1), ("nmax", 5), ("grid", 16)):
                if getattr(args, name, lo) < lo:
                    raise ReinforcedQSDError(f"--{name} must be >= {lo}")
        return run_experiment(cfg, jobs=getattr(args, "jobs", None), out=out)
    except (ReinforcedQSDError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
