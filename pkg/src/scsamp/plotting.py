"""Minimal self-contained SVG renderings of the experiment CSVs."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SCHEMAS = {
    "profile": ["t", "row_index", "phi"],
    "mse": ["t", "mse_amp_mean", "mse_amp_stderr", "mse_se"],
    "phase": ["epsilon", "delta", "instances", "successes", "success_rate"],
}
WIDTH, HEIGHT, PAD = 640, 420, 56
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _read(csv_path, kind):
    if kind not in SCHEMAS:
        raise ValueError(f"unknown plot kind {kind!r}")
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{csv_path} is empty")
    if rows[0] != SCHEMAS[kind]:
        raise ValueError(f"{csv_path} header {rows[0]} does not match the {kind} schema")
    if len(rows) < 2:
        raise ValueError(f"{csv_path} has no data rows")
    data = np.array(rows[1:], dtype=float)
    return {name: data[:, j] for j, name in enumerate(rows[0])}


class _Canvas:
    def __init__(self, x_range, y_range, log_y=False, title="", xlabel="", ylabel=""):
        self.log_y = log_y
        self.x0, self.x1 = x_range
        self.y0, self.y1 = (np.log10(y_range[0]), np.log10(y_range[1])) if log_y else y_range
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<rect x="{PAD}" y="{PAD / 2}" width="{WIDTH - 1.5 * PAD}" height="{HEIGHT - 1.5 * PAD}" '
            'fill="none" stroke="black"/>',
            f'<text x="{WIDTH / 2}" y="16" text-anchor="middle">{title}</text>',
            f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle">{xlabel}</text>',
            f'<text x="14" y="{HEIGHT / 2}" transform="rotate(-90 14 {HEIGHT / 2})" '
            f'text-anchor="middle">{ylabel}</text>',
        ]
        self._ticks()

    def px(self, x):
        return PAD + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (WIDTH - 1.5 * PAD)

    def py(self, y):
        y = np.asarray(y, float)
        if self.log_y:
            y = np.log10(np.maximum(y, 10.0**self.y0))
        return HEIGHT - PAD - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 1.5 * PAD)

    def _ticks(self):
        for x in np.linspace(self.x0, self.x1, 5):
            self.parts.append(f'<text x="{self.px(x):.1f}" y="{HEIGHT - PAD + 14}" '
                              f'text-anchor="middle">{x:.3g}</text>')
        for y in np.linspace(self.y0, self.y1, 5):
            label = f"1e{y:.1f}" if self.log_y else f"{y:.3g}"
            ypix = HEIGHT - PAD - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 1.5 * PAD)
            self.parts.append(f'<text x="{PAD - 4}" y="{ypix + 4:.1f}" text-anchor="end">{label}</text>')

    def polyline(self, x, y, color, cls="series", dash=None):
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(self.px(x), self.py(y)))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline class="{cls}" points="{pts}" fill="none" '
                          f'stroke="{color}" stroke-width="1.3"{extra}/>')

    def line(self, x0, y0, x1, y1, color, cls):
        self.parts.append(f'<line class="{cls}" x1="{self.px(x0):.2f}" y1="{self.py(y0):.2f}" '
                          f'x2="{self.px(x1):.2f}" y2="{self.py(y1):.2f}" stroke="{color}"/>')

    def circle(self, x, y, color, cls="point"):
        self.parts.append(f'<circle class="{cls}" cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
                          f'r="3" fill="{color}"/>')

    def legend(self, i, label, color):
        y = PAD / 2 + 14 + 14 * i
        self.parts.append(f'<text x="{WIDTH - PAD}" y="{y}" text-anchor="end" fill="{color}">{label}</text>')

    def svg(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _positive_range(*arrays):
    vals = np.concatenate([np.ravel(a) for a in arrays])
    vals = vals[np.isfinite(vals) & (vals > 0)]
    if vals.size == 0:
        return 1e-12, 1.0
    return float(vals.min()), float(vals.max())


def _profile_svg(d):
    canvas = _Canvas((d["row_index"].min(), d["row_index"].max()), _positive_range(d["phi"]),
                     log_y=True, title="phi_a(t)", xlabel="row a", ylabel="phi")
    for i, t in enumerate(np.unique(d["t"])):
        sel = d["t"] == t
        canvas.polyline(d["row_index"][sel], d["phi"][sel], COLORS[i % len(COLORS)])
    return canvas


def _mse_svg(d):
    lo_band = d["mse_amp_mean"] - d["mse_amp_stderr"]
    hi_band = d["mse_amp_mean"] + d["mse_amp_stderr"]
    canvas = _Canvas((d["t"].min(), d["t"].max()),
                     _positive_range(d["mse_amp_mean"], d["mse_se"], hi_band),
                     log_y=True, title="MSE versus iteration", xlabel="t", ylabel="MSE")
    canvas.polyline(d["t"], d["mse_se"], COLORS[1], dash="4 3")
    canvas.polyline(d["t"], d["mse_amp_mean"], COLORS[0])
    floor = 10.0**canvas.y0
    for t, a, b in zip(d["t"], lo_band, hi_band):
        canvas.line(t, max(a, floor), t, max(b, floor), COLORS[0], "errbar")
    canvas.legend(0, "AMP", COLORS[0])
    canvas.legend(1, "SE", COLORS[1])
    return canvas


def _phase_svg(d, fits):
    canvas = _Canvas((d["delta"].min(), d["delta"].max()), (0.0, 1.0),
                     title="empirical success rate", xlabel="delta", ylabel="success rate")
    for i, eps in enumerate(np.unique(d["epsilon"])):
        color = COLORS[i % len(COLORS)]
        sel = d["epsilon"] == eps
        for x, y in zip(d["delta"][sel], d["success_rate"][sel]):
            canvas.circle(x, y, color)
        canvas.legend(i, f"eps={eps:g}", color)
        fit = next((f for f in fits if abs(f["epsilon"] - eps) < 1e-12), None)
        if fit and fit.get("beta"):
            grid = np.linspace(d["delta"].min(), d["delta"].max(), 200)
            curve = 1.0 / (1.0 + np.exp(-(grid - fit["delta_c"]) / fit["beta"]))
            canvas.polyline(grid, curve, color, cls="fit")
    return canvas


def emit_plot(csv_path: str | Path, kind: str, out: str | Path | None = None,
              fit: str | Path | list | None = None) -> Path:
    """Render ``csv_path`` as ``kind`` (profile | mse | phase) to ``out`` (default: .svg beside it).

    ``fit`` may be one fit JSON path or a list of them; their logistic curves are overlaid.
    """
    d = _read(csv_path, kind)
    if kind == "profile":
        canvas = _profile_svg(d)
    elif kind == "mse":
        canvas = _mse_svg(d)
    else:
        paths = [] if fit is None else ([fit] if isinstance(fit, (str, Path)) else list(fit))
        canvas = _phase_svg(d, [json.loads(Path(p).read_text()) for p in paths])
    out = Path(out) if out is not None else Path(csv_path).with_suffix(".svg")
    out.write_text(canvas.svg())
    return out
