"""Noiseless success-rate sweeps for all three schemes, one CSV and fit per (scheme, eps),
plus a table of delta_c next to the SE predictions."""
import argparse
from pathlib import Path

from scsamp.experiments import (
    PHASE_HEADER,
    ExperimentConfig,
    run_phase_sweep,
    write_csv,
    write_fit_json,
)
from scsamp.plotting import emit_plot
from scsamp.state_evolution import renyi_threshold, tune_alpha

ap = argparse.ArgumentParser()
ap.add_argument("--epsilons", default="0.1,0.2,0.3")
ap.add_argument("--instances", type=int, default=20)
ap.add_argument("--step", type=float, default=0.02)
ap.add_argument("--n", type=int, default=1000)
ap.add_argument("--threads", type=int, default=1)
ap.add_argument("--outdir", default="results/phase")
args = ap.parse_args()

outdir = Path(args.outdir)
outdir.mkdir(parents=True, exist_ok=True)
print("eps  scheme  delta_c  ci_low  ci_high  flags  se_prediction")
for eps in (float(e) for e in args.epsilons.split(",")):
    dt = renyi_threshold(eps).delta_tilde
    d3 = tune_alpha(eps)[1]
    # windows around where each scheme is expected to switch on
    centres = {"I": (eps + dt) / 2, "II": dt, "III": d3}
    for scheme, c in centres.items():
        lo, hi = max(c - 0.08, args.step), min(c + 0.08, 0.98)
        grid = f"{lo:.2f}:{hi:.2f}:{args.step}"
        cfg = ExperimentConfig.from_dict(dict(n=args.n, epsilon=eps, sigma=0.0, scheme=scheme,
                                              instances=args.instances, delta_grid=grid))
        sweep = run_phase_sweep(cfg, threads=args.threads)
        stem = outdir / f"phase_{scheme}_eps{eps:g}".replace(".", "p")
        write_csv(stem.with_suffix(".csv"), PHASE_HEADER, sweep.rows())
        write_fit_json(stem.with_suffix(".json"), sweep)
        emit_plot(stem.with_suffix(".csv"), "phase", fit=stem.with_suffix(".json"))
        f = sweep.fit
        pred = {"I": eps, "II": dt, "III": d3}[scheme]
        print(f"{eps:<4} {scheme:<7} {f.delta_c:.4f}  {f.ci_low:.4f}  {f.ci_high:.4f}  "
              f"{','.join(f.flags) or '-'}  {pred:.4f}")
