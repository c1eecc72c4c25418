"""Measured constants for the approximation hypotheses and the operator inequalities.

Each check reduces to a constant ``C(p)`` evaluated along a parameter sweep
(``h`` halving, or ``K`` growing).  A constant is called stable when it is
finite and never grows by more than ``STABILITY_FACTOR`` between consecutive
sweep points; shrinking constants (faster convergence than assumed) count as
stable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..lattice import (
    GridSpec,
    LatticeField,
    discrete_sobolev_constant,
    fe_h1_norm,
    norm_mu,
    omega,
    operator_norm_estimate,
    tail_norm_sq,
)
from ..observables import NU_DEFAULT, epsilon_mu, hamiltonian_h, mass_h
from ..soliton import eta, eta_sampler

STABILITY_FACTOR = 2.0
OPNORM_CONSTANT = 3.0
GAUSS_POINTS = 6

DEFAULT_HS = (0.4, 0.2, 0.1)
DEFAULT_KH = 15.0
DEFAULT_TAIL_H = 0.1875
DEFAULT_TAIL_KS = (40, 80, 160)


def _eta_prime(x):
    x = np.asarray(x, dtype=float)
    return -np.sqrt(0.5) * 0.5 * np.tanh(x / 2) / np.cosh(x / 2)


def _smooth_family():
    """Smooth test functions ``(f, f')`` decaying well inside ``|x| <= 15``."""

    def f1(x):
        return eta(x) + 0j

    def d1(x):
        return _eta_prime(x) + 0j

    def f2(x):
        return eta(x) * np.exp(0.5j * x)

    def d2(x):
        return (_eta_prime(x) + 0.5j * eta(x)) * np.exp(0.5j * x)

    def f3(x):
        return np.exp(-x**2 / 8) * (1 + 0.5j * x)

    def d3(x):
        return np.exp(-x**2 / 8) * (0.5j - x / 4 * (1 + 0.5j * x))

    return [("eta", f1, d1), ("eta_boost", f2, d2), ("gauss", f3, d3)]


def _element_quadrature(grid: GridSpec):
    """Gauss-Legendre nodes/weights on every element of the zero-extended window."""
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    h = grid.h
    left = np.arange(-(grid.K + 1), grid.K + 1) * h
    x = left[:, None] + 0.5 * h * (nodes[None, :] + 1)
    w = np.broadcast_to(0.5 * h * weights, x.shape)
    return left, x, w


def _interpolant_on_elements(f: LatticeField):
    """Values and (constant) slopes of ``i_h f`` at the element quadrature nodes."""
    grid = f.grid
    left, x, w = _element_quadrature(grid)
    pad = np.concatenate(([0.0], f.values, [0.0]))
    a, b = pad[:-1], pad[1:]
    s = (x - left[:, None]) / grid.h
    vals = a[:, None] * (1 - s) + b[:, None] * s
    slope = ((b - a) / grid.h)[:, None] * np.ones_like(s)
    return x, w, vals, slope


def continuous_mass(f: LatticeField) -> float:
    """``N(i_h f)`` by per-element Gauss quadrature (exact for the quadratic integrand)."""
    _, w, vals, _ = _interpolant_on_elements(f)
    return float(np.sum(w * np.abs(vals) ** 2))


def continuous_energy(f: LatticeField) -> float:
    """``H(i_h f) = int |u'|^2 - |u|^4 / 2`` (exact quadrature on each element)."""
    _, w, vals, slope = _interpolant_on_elements(f)
    return float(np.sum(w * (np.abs(slope) ** 2 - 0.5 * np.abs(vals) ** 4)))


def interpolation_error_h1(f_cont, df_cont, grid: GridSpec) -> float:
    """``||i_h pi_{h,K} f - f||_{H^1}`` on the window; the sampled function must be negligible outside."""
    samples = LatticeField(grid, np.asarray(f_cont(grid.x), dtype=complex))
    x, w, vals, slope = _interpolant_on_elements(samples)
    err = np.sum(w * (np.abs(slope - df_cont(x)) ** 2 + np.abs(vals - f_cont(x)) ** 2))
    return float(np.sqrt(err))


def eta_h1_outside(L: float) -> float:
    """``int_{|x|>L} |eta'|^2 + |eta|^2`` in closed form."""
    t = np.tanh(L / 2)
    return float(2 * ((1 - t) + (1 - t**3) / 12))


def eta_interpolation_error(grid: GridSpec) -> float:
    """``||i_mu pi_mu eta - eta||_{H^1(R)}``, including the part of ``eta`` cut off by the window."""
    inside = interpolation_error_h1(lambda x: eta(x) + 0j, lambda x: _eta_prime(x) + 0j, grid)
    return float(np.sqrt(inside**2 + eta_h1_outside((grid.K + 1) * grid.h)))


# ---------------------------------------------------------------------------


@dataclass
class ValidationRow:
    name: str
    parameter: str
    params: list
    values: list
    stable: bool
    bound: float | None = None
    within_bound: bool | None = None
    note: str = ""

    @property
    def growth(self) -> list:
        v = self.values
        return [v[i + 1] / v[i] if v[i] != 0 else float("inf") for i in range(len(v) - 1)]

    @property
    def passed(self) -> bool:
        return self.stable and self.within_bound is not False


@dataclass
class ValidationReport:
    rows: list = field(default_factory=list)

    def row(self, name: str) -> ValidationRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def all_stable(self) -> bool:
        return all(r.stable for r in self.rows)

    def table(self) -> str:
        lines = [f"{'check':<28} {'sweep':<6} {'constants':<44} {'stable':<7} bound"]
        for r in self.rows:
            consts = ", ".join(f"{v:.4g}" for v in r.values)
            bound = "" if r.bound is None else (
                f"<= {r.bound:g}: {'PASS' if r.within_bound else 'FAIL'}")
            lines.append(f"{r.name:<28} {r.parameter:<6} {consts:<44} "
                         f"{'yes' if r.stable else 'NO':<7} {bound}")
            if r.note:
                lines.append(f"    {r.note}")
        return "\n".join(lines)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        js = out / "validation.json"
        js.write_text(json.dumps([asdict(r) | {"growth": r.growth} for r in self.rows],
                                 indent=2, sort_keys=True) + "\n")
        cs = out / "validation.csv"
        with cs.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "parameter", "param", "constant", "stable", "bound", "within_bound"])
            for r in self.rows:
                for p, v in zip(r.params, r.values):
                    w.writerow([r.name, r.parameter, repr(p), repr(float(v)), r.stable,
                                "" if r.bound is None else repr(r.bound),
                                "" if r.within_bound is None else r.within_bound])
        return [js, cs]


def is_stable(values, factor: float = STABILITY_FACTOR) -> bool:
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        return False
    return bool(all(v[i + 1] <= factor * v[i] for i in range(len(v) - 1)))


def _grid(h: float, kh: float) -> GridSpec:
    return GridSpec(h, int(round(kh / h)))


def validate(hs=DEFAULT_HS, kh: float = DEFAULT_KH, tail_h: float = DEFAULT_TAIL_H,
             tail_ks=DEFAULT_TAIL_KS, tau: float = 0.02, nu: float = NU_DEFAULT,
             n_random: int = 200, seed: int = 0) -> ValidationReport:
    """Sweep ``h`` at fixed ``K h`` (and ``K`` at fixed ``h`` for the tail) and collect constants."""
    hs = [float(h) for h in hs]
    rep = ValidationReport()
    fam = _smooth_family()
    c_i, c_ii, c_iii, c_iv = [], [], [], []
    for h in hs:
        grid = _grid(h, kh)
        ci = cii = ciii = 0.0
        for _, fc, _ in fam:
            f = LatticeField(grid, np.asarray(fc(grid.x), dtype=complex))
            fe2 = fe_h1_norm(f) ** 2
            ci = max(ci, abs(norm_mu(f) ** 2 - fe2) / (h * fe2))
            cii = max(cii, abs(continuous_mass(f) - mass_h(f)) / h)
            ciii = max(ciii, abs(continuous_energy(f) - hamiltonian_h(f)) / h)
        c_i.append(ci)
        c_ii.append(cii)
        c_iii.append(ciii)
        c_iv.append(eta_interpolation_error(grid) / epsilon_mu(h, grid.K, 0.0, nu))
    rep.rows.append(ValidationRow("(i) norm equivalence", "h", hs, c_i, is_stable(c_i),
                                  note="|norm_mu^2 - ||i_h f||_H1^2| / (h ||i_h f||_H1^2)"))
    rep.rows.append(ValidationRow("(ii) mass closeness", "h", hs, c_ii, is_stable(c_ii),
                                  note="|N(i_h f) - N_h(f)| / h"))
    rep.rows.append(ValidationRow("(iii) energy closeness", "h", hs, c_iii, is_stable(c_iii),
                                  note="|H(i_h f) - H_h(f)| / h"))
    rep.rows.append(ValidationRow("(iv) profile approximation", "h", hs, c_iv, is_stable(c_iv),
                                  note="||i pi eta - eta||_H1 / epsilon_mu"))

    # tail constant gamma at fixed h, K growing
    ks = [int(k) for k in tail_ks]
    sampler = eta_sampler()
    tails = [tail_norm_sq(sampler, GridSpec(tail_h, k)) for k in ks]
    gam = [t * tail_h**2 * np.exp(nu * k * tail_h) for t, k in zip(tails, ks)]
    sharp = [t * tail_h**2 * np.exp(2 * nu * k * tail_h) for t, k in zip(tails, ks)]
    rep.rows.append(ValidationRow("tail gamma", "K", ks, gam, is_stable(gam),
                                  note=f"tail^2 h^2 exp(nu K h), nu = {nu:g}"))
    rep.rows.append(ValidationRow("tail gamma (sharp rate)", "K", ks, sharp, is_stable(sharp),
                                  note="tail^2 h^2 exp(2 nu K h): the sampled tail decays at twice nu"))

    # discrete Sobolev inequality on random fields, both seminorm weights
    rng = np.random.default_rng(seed)
    sob1, sob2 = [], []
    for h in hs:
        grid = _grid(h, kh)
        worst1 = worst2 = 0.0
        for _ in range(n_random):
            v = rng.standard_normal(grid.npoints) + 1j * rng.standard_normal(grid.npoints)
            f = LatticeField(grid, v)
            m = mass_h(f)
            worst1 = max(worst1, norm_mu(f, "fe-exact") ** 2 / (discrete_sobolev_constant(h) * m))
            worst2 = max(worst2, norm_mu(f, "doubled") ** 2 / (discrete_sobolev_constant(h) * m))
        sob1.append(worst1)
        sob2.append(worst2)
    rep.rows.append(ValidationRow("discrete Sobolev (w=1)", "h", hs, sob1, is_stable(sob1), 1.0,
                                  bool(max(sob1) <= 1.0),
                                  note="norm_mu^2 / ((4/h^2 + 1) N_h), max over random fields"))
    rep.rows.append(ValidationRow("discrete Sobolev (w=2)", "h", hs, sob2, is_stable(sob2), 1.0,
                                  bool(max(sob2) <= 1.0),
                                  note="same with the weight-2 seminorm; needs 8/h^2 + 1"))

    # operator norm of tau * Delta_h in the mu-norm, in units of tau / h^2
    op = []
    exact = []
    for h in hs:
        grid = _grid(h, kh)
        op.append(operator_norm_estimate(grid, tau) * h**2 / tau)
        exact.append(omega(grid, grid.npoints) * h**2)
    rep.rows.append(ValidationRow("operator norm vs 3 tau/h^2", "h", hs, op, is_stable(op),
                                  OPNORM_CONSTANT, bool(max(op) <= OPNORM_CONSTANT),
                                  note="power iteration; the exact value is tau * omega_max "
                                       f"= ({', '.join(f'{e:.4f}' for e in exact)}) tau/h^2"))
    rep.rows.append(ValidationRow("operator norm vs 4 tau/h^2", "h", hs, op, is_stable(op), 4.0,
                                  bool(max(op) <= 4.0), note="omega_max < 4/h^2"))
    return rep
