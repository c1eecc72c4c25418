"""Static SVG figures: |psi| profiles at snapshot times, distance and drift series.

Output is byte-identical for identical inputs: the SVG hash salt is fixed and
no date metadata is written.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..integrators import TrajectoryRecord  # noqa: E402

_RC = {"svg.hashsalt": "dnls-orbit", "svg.fonttype": "path", "figure.dpi": 100}
_META = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def draw_profiles(profiles: dict, path, title: str = "|psi|") -> Path:
    """Up to four panels; ``profiles`` maps time to ``(x, |psi|)``."""
    if not profiles:
        raise ValueError("no snapshots to plot")
    chosen = sorted(profiles)[:4]
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(2, 2, figsize=(8, 6), sharex=True)
        for ax, t in zip(axes.flat, chosen):
            x, a = profiles[t]
            ax.plot(x, a, lw=1.0)
            ax.set_title(f"t = {t:g}")
            ax.set_ylim(bottom=0)
        for ax in list(axes.flat)[len(chosen):]:
            ax.axis("off")
        for ax in axes[-1]:
            ax.set_xlabel("x")
        fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, Path(path))


def draw_series(t, series: dict, path, ylabel: str, log_scale: bool = False) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 3.5))
        for label, y in series.items():
            y = np.asarray(y, dtype=float)
            if not np.any(np.isfinite(y)):
                continue
            if log_scale:
                # zeros cannot be drawn on a log axis
                y = np.where(y > 0, y, np.nan)
            ax.plot(t, y, lw=1.0, label=label)
        if log_scale:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        if len(series) > 1:
            ax.legend()
        fig.tight_layout()
        return _save(fig, Path(path))


def _drifts(columns: dict) -> dict:
    return {k: np.abs(np.asarray(columns[k]) - columns[k][0]) for k in columns}


def emit_plots(record: TrajectoryRecord, out_dir, log_scale: bool = True) -> list[Path]:
    """Profile panels (when snapshots exist), distance and drift series as SVG."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    if record.snapshots:
        prof = {t: (f.grid.x, np.abs(f.values)) for t, f in record.snapshots.items()}
        title = f"|psi|, {record.config.kind}, tau = {record.config.tau:g}"
        paths.append(draw_profiles(prof, out / "profiles.svg", title))
    t = np.asarray(record.times)
    paths.append(draw_series(t, {"dist": record.series("dist")}, out / "distance.svg",
                             "distance to orbit"))
    cols = {"N_h": record.series("N_h"), "H_h": record.series("H_h"),
            "H_mod": record.series("H_modified")}
    paths.append(draw_series(t, _drifts(cols), out / "drift.svg", "|X(t) - X(0)|", log_scale))
    return paths


def _read_csv(path: Path) -> dict:
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return {}
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def plots_from_directory(run_dir, log_scale: bool = True) -> list[Path]:
    """Redraw the figures of a run directory from its CSV files."""
    d = Path(run_dir)
    drift = d / "drift.csv"
    if not drift.exists():
        raise FileNotFoundError(f"{drift} not found")
    cols = _read_csv(drift)
    paths = []
    prof = {}
    for p in sorted(d.glob("snapshot_t*.csv")):
        m = re.fullmatch(r"snapshot_t(.+)\.csv", p.name)
        snap = _read_csv(p)
        prof[float(m.group(1))] = (snap["x"], snap["abs"])
    if prof:
        paths.append(draw_profiles(prof, d / "profiles.svg"))
    paths.append(draw_series(cols["t"], {"dist": cols["dist"]}, d / "distance.svg",
                             "distance to orbit"))
    sel = {"N_h": cols["N_h"], "H_h": cols["H_h"], "H_mod": cols["H_mod_spec"]}
    paths.append(draw_series(cols["t"], _drifts(sel), d / "drift.svg", "|X(t) - X(0)|", log_scale))
    return paths
