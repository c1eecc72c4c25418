"""Execute a RunConfig and write its manifest, drift tables and snapshots."""

from __future__ import annotations

import csv
import json
import logging
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..integrators import BLOWUP, COMPLETED, DFP_FAILURE, TrajectoryRecord, integrate
from ..lattice import LatticeField, norm_mu
from ..modified_energy import (
    ModifiedEnergyConfig,
    cfl_check,
    drift_report,
    h_modified,
    max_admissible_M,
)
from ..observables import epsilon_mu
from .config import RunConfig, initial_field, reference_field, save_config

log = logging.getLogger(__name__)

EXIT_CODES = {COMPLETED: 0, BLOWUP: 2, DFP_FAILURE: 3}
DRIFT_CSV_COLUMNS = ("step", "t", "N_h", "H_h", "H_mod_phys", "H_mod_spec", "dist", "alpha",
                     "r", "u_norm", "max_abs")
SNAPSHOT_COLUMNS = ("j", "x", "re", "im", "abs")
INSTABILITY_DIST = 1.0


@dataclass
class RunResult:
    config: RunConfig
    record: TrajectoryRecord
    phys: list
    manifest: dict
    output_dir: Path | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.record.status]

    @property
    def instability_time(self) -> float | None:
        return self.manifest["instability_time"]


def _fmt(x) -> str:
    return repr(float(x))


def drift_rows(result: RunResult):
    rec = result.record
    for i, (n, t, rep) in enumerate(zip(rec.steps, rec.times, rec.reports)):
        ch = rep.chart
        alpha = ch.alpha if ch is not None else float("nan")
        r = ch.r if ch is not None else float("nan")
        u_norm = norm_mu(ch.u) if ch is not None else float("nan")
        yield (n, t, rep.N_h, rep.H_h, result.phys[i], rep.H_modified, rep.dist, alpha, r,
               u_norm, rep.max_abs)


def write_drift_csv(result: RunResult, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DRIFT_CSV_COLUMNS)
        for row in drift_rows(result):
            w.writerow([int(row[0])] + [_fmt(x) for x in row[1:]])
    return path


def write_snapshot(f: LatticeField, path) -> Path:
    path = Path(path)
    g = f.grid
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for j, x, v in zip(g.indices, g.x, f.values):
            w.writerow([int(j), _fmt(x), _fmt(v.real), _fmt(v.imag), _fmt(abs(v))])
    return path


def snapshot_name(t: float) -> str:
    return f"snapshot_t{t:g}.csv"


def _finite_or_none(x):
    return None if x is None or not np.isfinite(x) else float(x)


def execute(config: RunConfig) -> RunResult:
    """Integrate ``config`` in memory; no files are written."""
    grid, tau = config.grid, config.tau
    gate = cfl_check(grid.h, tau, 0)
    if not gate.passed:
        log.warning("CFL gate fails for %s (%s); running anyway", config.name, gate)
    lie = config.kind in ("lie_AP", "lie_PA")
    spec_fn = phys_fn = None
    if config.modified_energy and lie and gate.passed:
        spec_cfg = ModifiedEnergyConfig.for_stepper(config.kind, tau, "resummed_spectral")
        phys_cfg = ModifiedEnergyConfig.for_stepper(config.kind, tau, "first_order_physical")
        spec_fn = lambda f: h_modified(f, spec_cfg)  # noqa: E731
        phys_fn = lambda f: h_modified(f, phys_cfg)  # noqa: E731

    phys: list = []

    def record_phys(n, t, f):
        phys.append(phys_fn(f) if phys_fn is not None else float("nan"))

    reference = reference_field(grid)
    f0 = initial_field(config)
    snaps = config.snapshot_times if config.emit_snapshots else ()
    record = integrate(f0, config.stepper, config.t_end, cadence=config.cadence,
                       reference=reference, modified=spec_fn, hooks=(record_phys,),
                       snapshot_times=[t for t in snaps if t <= config.t_end + 1e-9])
    t_inst = record.first_crossing("dist", INSTABILITY_DIST)
    dists = record.series("dist")
    summary = drift_report(record).summary
    manifest = {
        "config": config.to_dict(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "grid": {"h": grid.h, "K": grid.K, "npoints": grid.npoints, "half_width": grid.half_width},
        "cfl": {"ratio": gate.ratio, "bound_M0": gate.bound, "passed_M0": gate.passed,
                "max_admissible_M": max_admissible_M(grid.h, tau)},
        "epsilon_mu": epsilon_mu(grid.h, grid.K, tau),
        "steps_requested": config.nsteps,
        "status": record.status,
        "message": record.message,
        "final_step": record.final_step,
        "t_final": record.t_final,
        "instability_time": t_inst,
        "max_dist": _finite_or_none(np.nanmax(dists)) if np.any(np.isfinite(dists)) else None,
        "terminal_dist": _finite_or_none(dists[-1]),
        "drift": {k: {kk: _finite_or_none(vv) for kk, vv in v.items()} for k, v in summary.items()},
        "snapshots": [snapshot_name(t) for t in sorted(record.snapshots)],
    }
    return RunResult(config=config, record=record, phys=phys, manifest=manifest)


def write_outputs(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = result.config
    save_config(config, out / "config.json")
    write_drift_csv(result, out / "drift.csv")
    drift_report(result.record).write_csv(out / "energy_drift.csv")
    if config.emit_snapshots:
        for t, f in sorted(result.record.snapshots.items()):
            write_snapshot(f, out / snapshot_name(t))
    if config.emit_plots:
        from .plots import emit_plots

        result.manifest["plots"] = [p.name for p in emit_plots(result.record, out)]
    (out / "manifest.json").write_text(json.dumps(result.manifest, indent=2, sort_keys=True) + "\n")
    result.output_dir = out
    return out


def run(config: RunConfig) -> RunResult:
    """Integrate ``config`` and write its files if ``output_dir`` is set.

    The manifest (``manifest.json``) holds every parameter plus the code
    version, the CFL report, ``epsilon_mu``, the termination status and the
    first time ``dist > 1``.  ``result.exit_code`` is 0, 2 or 3 for
    completed, blowup or DFP failure.
    """
    result = execute(config)
    if config.output_dir:
        write_outputs(result, config.output_dir)
    return result
