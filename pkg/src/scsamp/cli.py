"""Command-line entry point: ``scsamp evolve | mse | phase | threshold``."""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import experiments as ex
from .ensemble import build_spatially_coupled, dump_operator
from .plotting import emit_plot
from .state_evolution import renyi_threshold

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _load(path) -> ex.ExperimentConfig:
    return ex.ExperimentConfig.from_json(path) if path else ex.ExperimentConfig()


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _mostly_diverged(diverged: int, total: int) -> bool:
    return total > 0 and diverged > total / 2


def cmd_evolve(args) -> int:
    cfg = _load(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    ex.write_csv(args.out, ex.PROFILE_HEADER, ex.run_profile_experiment(cfg))
    if args.svg:
        emit_plot(args.out, "profile", args.svg)
    if args.dump_operator:
        import numpy as np

        op = build_spatially_coupled(cfg.ensemble(), np.random.default_rng(ex.seed_plan(cfg.seed, "evolve", 0)))
        dump_operator(op, args.dump_operator)
    return EXIT_OK


def cmd_mse(args) -> int:
    cfg = dataclasses.replace(_load(args.config), instances=args.instances)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    res = ex.run_mse_comparison(cfg, threads=args.threads)
    ex.write_csv(args.out, ex.MSE_HEADER, res.rows())
    if args.trajectories:
        folder = Path(args.trajectories)
        folder.mkdir(parents=True, exist_ok=True)
        for i, r in enumerate(res.trajectories):
            ex.trajectory_of(r).to_csv(folder / f"instance_{i:04d}.csv")
    if args.svg:
        emit_plot(args.out, "mse", args.svg)
    print(f"diverged {res.diverged}/{res.instances}", file=sys.stderr)
    if res.diverged < res.instances:
        rep = ex.mse_decay_report(res)
        print(f"non-increasing after t=5: {rep.monotone}; slope {rep.slope_linear:.3e}/iter, "
              f"{rep.slope_log10:.3e} decades/iter", file=sys.stderr)
    return EXIT_DIVERGED if _mostly_diverged(res.diverged, res.instances) else EXIT_OK


def cmd_phase(args) -> int:
    cfg = dataclasses.replace(_load(args.config), scheme=args.scheme, epsilon=args.epsilon,
                              delta_grid=args.delta_grid, instances=args.instances)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    sweep = ex.run_phase_sweep(cfg, threads=args.threads)
    ex.write_csv(args.out, ex.PHASE_HEADER, sweep.rows())
    ex.write_fit_json(args.fit, sweep)
    if args.svg:
        emit_plot(args.out, "phase", args.svg, fit=args.fit)
    total = int(sweep.instances.sum())
    print(f"delta_c {sweep.fit.delta_c:.4f} [{sweep.fit.ci_low:.4f}, {sweep.fit.ci_high:.4f}] "
          f"flags={','.join(sweep.fit.flags) or '-'} diverged {sweep.diverged}/{total}", file=sys.stderr)
    return EXIT_DIVERGED if _mostly_diverged(sweep.diverged, total) else EXIT_OK


def cmd_threshold(args) -> int:
    rows = []
    for eps in args.epsilon:
        if not 0.0 < eps < 1.0:
            raise ex.ConfigError("epsilon must lie in (0, 1)")
        res = renyi_threshold(eps)
        rows.append((eps, res.delta_tilde, res.s_star))
    if args.out:
        ex.write_csv(args.out, ex.THRESHOLD_HEADER, rows)
    print(",".join(ex.THRESHOLD_HEADER))
    for eps, dt, s in rows:
        print(f"{eps!r},{dt!r},{s!r}")
    return EXIT_OK


def _eps_list(text: str) -> list[float]:
    try:
        return [float(u) for u in text.split(",") if u]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    threads = argparse.ArgumentParser(add_help=False)
    threads.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                         help="worker processes for Monte Carlo instances")
    parser = argparse.ArgumentParser(prog="scsamp", parents=[threads])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", parents=[threads], help="coupled SE profile trajectory")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--dump-operator", help="write the operator audit file for the config's seed")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("mse", parents=[threads], help="AMP versus SE mean-square error")
    p.add_argument("--config")
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.add_argument("--seed", type=_u64)
    p.add_argument("--trajectories", help="directory for per-instance t,mse_amp CSVs")
    p.set_defaults(func=cmd_mse)

    p = sub.add_parser("phase", parents=[threads], help="phase-transition sweep and logit fit")
    p.add_argument("--config")
    p.add_argument("--scheme", choices=ex.SCHEMES, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta-grid", required=True)
    p.add_argument("--instances", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--svg")
    p.add_argument("--seed", type=_u64)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("threshold", parents=[threads], help="print delta_tilde(eps) and s*")
    p.add_argument("--epsilon", type=_eps_list, required=True, help="one value or a comma list")
    p.add_argument("--out")
    p.set_defaults(func=cmd_threshold)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.threads = getattr(args, "threads", 1)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ex.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
