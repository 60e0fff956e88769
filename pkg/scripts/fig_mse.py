"""AMP versus SE mean-square error for the coupled scheme."""
import argparse
from pathlib import Path

from scsamp.experiments import MSE_HEADER, ExperimentConfig, run_mse_comparison, write_csv
from scsamp.plotting import emit_plot

ap = argparse.ArgumentParser()
ap.add_argument("--config", default=str(Path(__file__).parents[1] / "configs" / "desk.json"))
ap.add_argument("--out", default="results/mse.csv")
ap.add_argument("--threads", type=int, default=1)
args = ap.parse_args()

cfg = ExperimentConfig.from_json(args.config)
res = run_mse_comparison(cfg, threads=args.threads)
out = Path(args.out)
out.parent.mkdir(parents=True, exist_ok=True)
write_csv(out, MSE_HEADER, res.rows())
print(f"diverged {res.diverged}/{res.instances}")
if res.diverged < res.instances:
    print(f"plot -> {emit_plot(out, 'mse')}")
