"""Command-line entry point: run experiments, summarize bundles, certify the
stepsize calculus, and solve reference equilibria."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from dasa import bandwidth, certify, experiment, vi

OUTPUT_DIR_ENV = "DASA_OUTPUT_DIR"


def _resolve_config(args) -> experiment.ExperimentConfig:
    if args.paper_protocol:
        cfg = experiment.paper_protocol_config()
    elif args.config:
        cfg = experiment.load_config(args.config)
    else:
        raise SystemExit("either --config PATH or --paper-protocol is required")
    updates = {}
    out = args.out or os.environ.get(OUTPUT_DIR_ENV)
    if out:
        updates["output_dir"] = out
    if args.seed is not None:
        updates["base_seed"] = args.seed
    if args.jobs is not None:
        updates["jobs"] = args.jobs
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_run(args) -> int:
    cfg = _resolve_config(args)
    result = experiment.run_experiment(cfg)
    print(f"bundle written to {result.output_dir}")
    if not result.ok:
        for sid, scheme, error in result.failed:
            print(f"FAILED S{sid}/{scheme}: {error}", file=sys.stderr)
        return 1
    return 0


def _cmd_summarize(args) -> int:
    bundle = args.bundle or args.out or os.environ.get(OUTPUT_DIR_ENV)
    if not bundle:
        raise SystemExit("give the bundle directory (positional) or --out")
    table = experiment.summarize(bundle)
    print(f"{'S':>3} {'scheme':<10} {'ci_low':>12} {'ci_high':>12} {'midpoint':>12}  winner")
    for row in table.rows:
        print(
            f"{row.setting_id:>3} {row.scheme:<10} {row.ci_low:12.4e} "
            f"{row.ci_high:12.4e} {row.midpoint:12.4e}  {row.winner}"
        )
    print("\nrobustness (max midpoint / per-setting best):")
    for scheme, score in sorted(table.robustness.items()):
        print(f"  {scheme:<10} {score:.4e}")
    return 0


def _cmd_verify(args) -> int:
    results = certify.run_all()
    for cert in results:
        print(cert.line())
    return 0 if all(c.passed for c in results) else 1


def _cmd_reference(args) -> int:
    topo = (
        bandwidth.default_topology()
        if args.topology in (None, "default")
        else bandwidth.load_topology(args.topology)
    )
    params = bandwidth.setting(args.setting)
    instance = bandwidth.build_instance(topo, params)
    x_star = bandwidth.solve_reference(instance, tol=args.tol)
    residual = vi.natural_residual(instance.feasible_set, instance.mapping, x_star, 1.0)
    consts = instance.constants
    print(f"instance {instance.name}: eta={consts.eta:.6g} L={consts.lipschitz:.6g} "
          f"nu={consts.nu:.6g} D={consts.diameter:.6g}")
    print(f"natural residual (gamma=1): {residual:.3e}")
    np.set_printoptions(precision=8, suppress=False)
    print("x* =", x_star)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dasa",
        description="Distributed adaptive-steplength stochastic approximation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment bundle")
    run.add_argument("--config", help="YAML experiment config")
    run.add_argument("--paper-protocol", action="store_true",
                     help="use the shipped full 12x4x25 protocol")
    run.add_argument("--out", help=f"output directory (or ${OUTPUT_DIR_ENV})")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--jobs", type=int, help="parallel workers over settings")
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="comparison tables from a bundle")
    summ.add_argument("bundle", nargs="?", help="bundle directory")
    summ.add_argument("--out", help="bundle directory (alternative spelling)")
    summ.set_defaults(func=_cmd_summarize)

    ver = sub.add_parser("verify", help="run the numerical certification suite")
    ver.set_defaults(func=_cmd_verify)

    ref = sub.add_parser("reference", help="solve and print a reference equilibrium")
    ref.add_argument("--setting", type=int, default=1, help="setting id 1..12")
    ref.add_argument("--topology", help="topology file (default: shipped instance)")
    ref.add_argument("--tol", type=float, default=1e-9, help="residual tolerance")
    ref.set_defaults(func=_cmd_reference)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
