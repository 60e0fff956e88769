"""Coupled SE profile phi_a(t) at desk scale: CSV plus SVG."""
import argparse
from pathlib import Path

from scsamp.experiments import PROFILE_HEADER, ExperimentConfig, run_profile_experiment, write_csv
from scsamp.plotting import emit_plot

ap = argparse.ArgumentParser()
ap.add_argument("--config", default=str(Path(__file__).parents[1] / "configs" / "desk.json"))
ap.add_argument("--out", default="results/profile.csv")
ap.add_argument("--record-every", type=int, default=20)
args = ap.parse_args()

cfg = ExperimentConfig.from_json(args.config)
cfg = ExperimentConfig.from_dict({**cfg.__dict__, "record_every": args.record_every})
out = Path(args.out)
out.parent.mkdir(parents=True, exist_ok=True)
rows = run_profile_experiment(cfg)
write_csv(out, PROFILE_HEADER, rows)
print(f"{len(rows)} rows -> {out}, plot -> {emit_plot(out, 'profile')}")
