"""Command line entry point: ``dnls-orbit {run,sweep,soliton,validate,spectrum,plot}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..lattice import GridSpec, dst_forward
from ..modified_energy import cfl_check, max_admissible_M
from ..observables import epsilon_mu
from ..soliton import SolitonConvergenceError, discrete_soliton
from .config import EXIT_BAD_CONFIG, ConfigError, RunConfig, load_config, preset, reference_field

log = logging.getLogger("dnls_orbit")


def _run_overrides(args) -> dict:
    keys = ("h", "K", "kind", "tau", "initial", "delta", "seed", "lowpass_omega", "t_end",
            "cadence", "output_dir", "dfp_tol", "dfp_maxit")
    out = {k: getattr(args, k) for k in keys}
    if args.snapshot_times is not None:
        out["snapshot_times"] = tuple(args.snapshot_times)
    if args.no_snapshots:
        out["emit_snapshots"] = False
    if args.plots:
        out["emit_plots"] = True
    if args.no_modified_energy:
        out["modified_energy"] = False
    return out


def _add_run_options(p):
    p.add_argument("--preset", choices=["E1", "E2", "E3"])
    p.add_argument("--full", action="store_true", help="E3 only: run to t = 1e6 (hours)")
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--h", type=float)
    p.add_argument("--K", type=int)
    p.add_argument("--kind", choices=["lie_AP", "lie_PA", "taylor2_then_P", "dfp"])
    p.add_argument("--tau", type=float)
    p.add_argument("--initial", choices=["sampled_soliton", "discrete_soliton", "perturbed"])
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lowpass-omega", dest="lowpass_omega", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--cadence", type=int)
    p.add_argument("--dfp-tol", dest="dfp_tol", type=float)
    p.add_argument("--dfp-maxit", dest="dfp_maxit", type=int)
    p.add_argument("--snapshot-times", dest="snapshot_times", type=float, nargs="*")
    p.add_argument("--no-snapshots", action="store_true")
    p.add_argument("--no-modified-energy", action="store_true")
    p.add_argument("--plots", action="store_true")
    p.add_argument("-o", "--output-dir", dest="output_dir")


def build_config(args) -> RunConfig:
    """Preset (or defaults), then the JSON file, then command-line flags."""
    base = preset(args.preset, full=args.full) if args.preset else RunConfig()
    if args.full and not args.preset:
        raise ConfigError("--full needs --preset E3")
    if args.config is not None:
        base = load_config(args.config, base)
    return base.updated(**_run_overrides(args))


def cmd_run(args) -> int:
    from .experiments import run

    cfg = build_config(args)
    if cfg.output_dir is None:
        cfg = cfg.updated(output_dir=f"runs/{cfg.name}")
    res = run(cfg)
    m = res.manifest
    t_inst = m["instability_time"]
    print(f"{cfg.name}: status {m['status']} at t = {m['t_final']:g} "
          f"({m['final_step']} steps); CFL ratio {m['cfl']['ratio']:.4g} "
          f"({'pass' if m['cfl']['passed_M0'] else 'FAIL'})")
    print(f"  max dist {m['max_dist']}, instability time {t_inst if t_inst is not None else 'none'}")
    for k in ("N_h", "H_h", "H_mod"):
        d = m["drift"].get(k, {})
        print(f"  {k}: max relative drift {d.get('max_rel')}")
    print(f"  output: {res.output_dir}")
    return res.exit_code


def _parse_list(text: str, cast):
    return [cast(x) for x in text.split(",") if x.strip()] if text else []


def cmd_sweep(args) -> int:
    from .sweep import sweep

    grid = {}
    for key, cast in (("h", float), ("K", int), ("tau", float), ("kind", str),
                      ("delta", float), ("seed", int)):
        val = getattr(args, f"sweep_{key}")
        if val is not None:
            grid[key] = _parse_list(val, cast)
    base = build_config(args).updated(emit_snapshots=False, output_dir=None)
    rows = sweep(grid, base=base, csv_path=args.csv, out_dir=args.runs_dir, workers=args.workers)
    print(f"{len(rows)} runs written to {args.csv}")
    return 0


def cmd_soliton(args) -> int:
    grid = GridSpec(args.h, args.K)
    try:
        pack = discrete_soliton(grid, mass_target=args.mass, tol=args.tol, maxit=args.maxit,
                                log_path=args.log)
    except SolitonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        pack = exc.pack
        code = 1
    else:
        code = 0
    if args.output is not None:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "x", "sampled", "discrete"])
            for j, x, s, d in zip(grid.indices, grid.x, pack.sampled.values.real,
                                  pack.discrete.values.real):
                w.writerow([int(j), repr(float(x)), repr(float(s)), repr(float(d))])
    from ..lattice import norm_mu

    print(json.dumps({
        "h": grid.h, "K": grid.K, "lambda_mu": pack.lambda_mu, "mass_target": pack.mass_target,
        "kkt_residual": pack.kkt_residual, "iterations": pack.iterations,
        "converged": pack.converged, "dist_to_sampled": norm_mu(pack.discrete - pack.sampled),
        "epsilon_mu": epsilon_mu(grid.h, grid.K),
    }, indent=2))
    return code


def cmd_validate(args) -> int:
    from .validate import validate

    rep = validate(hs=_parse_list(args.hs, float), kh=args.kh, tail_h=args.tail_h,
                   tail_ks=_parse_list(args.tail_ks, int), tau=args.tau, seed=args.seed)
    print(rep.table())
    if args.output_dir:
        rep.write(args.output_dir)
    return 0 if rep.all_stable else 1


def cmd_spectrum(args) -> int:
    grid = GridSpec(args.h, args.K)
    gate = cfl_check(args.h, args.tau, args.M)
    print(f"grid h = {grid.h:g}, K = {grid.K}, K h = {grid.half_width:g}, points = {grid.npoints}")
    print(f"omega_1 = {grid.frequencies[0]:.6g}, omega_max = {grid.frequencies[-1]:.6g} (< 4/h^2 = "
          f"{4 / grid.h**2:.6g})")
    print(f"CFL: {gate}; largest admissible M = {max_admissible_M(args.h, args.tau)}")
    print(f"epsilon_mu = {epsilon_mu(grid.h, grid.K, args.tau):.6g}")
    if args.output is not None:
        coeffs = dst_forward(reference_field(grid)).coeffs
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "omega", "abs_c"])
            for k, (om, c) in enumerate(zip(grid.frequencies, coeffs), start=1):
                w.writerow([k, repr(float(om)), repr(float(np.abs(c)))])
    return 0


def cmd_plot(args) -> int:
    from .plots import plots_from_directory

    for p in plots_from_directory(args.run_dir, log_scale=not args.linear):
        print(p)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnls-orbit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration and write its outputs")
    _add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter grid and aggregate to CSV")
    _add_run_options(p)
    for key in ("h", "K", "tau", "kind", "delta", "seed"):
        p.add_argument(f"--sweep-{key}", dest=f"sweep_{key}", help="comma-separated values")
    p.add_argument("--csv", default="sweep.csv")
    p.add_argument("--runs-dir", dest="runs_dir", help="also write each run's files here")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("soliton", help="compute the discrete soliton")
    p.add_argument("--h", type=float, default=0.1875)
    p.add_argument("--K", type=int, default=80)
    p.add_argument("--mass", type=float)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--maxit", type=int, default=100_000)
    p.add_argument("--log", help="convergence log CSV")
    p.add_argument("--output", help="profile CSV")
    p.set_defaults(func=cmd_soliton)

    p = sub.add_parser("validate", help="measure the approximation constants along an h-sweep")
    p.add_argument("--hs", default="0.4,0.2,0.1")
    p.add_argument("--kh", type=float, default=15.0)
    p.add_argument("--tail-h", dest="tail_h", type=float, default=0.1875)
    p.add_argument("--tail-ks", dest="tail_ks", default="40,80,160")
    p.add_argument("--tau", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output-dir", dest="output_dir")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("spectrum", help="frequencies, CFL report and soliton sine spectrum")
    p.add_argument("--h", type=float, default=0.1875)
    p.add_argument("--K", type=int, default=80)
    p.add_argument("--tau", type=float, default=0.02)
    p.add_argument("--M", type=int, default=0)
    p.add_argument("--output", help="CSV of k, omega_k, |c_k| for the sampled soliton")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("plot", help="redraw SVG figures of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--linear", action="store_true", help="linear drift axis")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
