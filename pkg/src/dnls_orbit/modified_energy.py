"""Modified energy of the splitting schemes and energy-drift bookkeeping.

To first order in the nonlinearity, and to all orders in ``tau * Delta_h``,
the Lie splitting conserves

    H_A + H_Z1,   H_Z1 = sum_{abcd} T_abcd * phi(-i tau Omega_abcd) * c_a c_b conj(c_c c_d)

where ``c_k`` are sine coefficients, ``T_abcd`` the quartic overlap of the
sine modes (so that ``sum T c_a c_b conj(c_c c_d) = H_P``),
``Omega = omega_a + omega_b - omega_c - omega_d`` and ``phi(x) = x / (e^x - 1)``
(generating function of the Bernoulli numbers).  For the reversed
composition the filter argument changes sign.  Expanding ``phi`` to first
order gives ``H_A + H_P - bracket_energy / 2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np

from .lattice import GridSpec, LatticeField, sine_transform
from .observables import _bracket, _kinetic_energy, _potential_energy

POLE_GUARD = 1e-9
MODES = ("first_order_physical", "resummed_spectral")


class CFLViolation(ValueError):
    pass


class FilterPoleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Bernoulli numbers and the filter


def bernoulli(kmax: int) -> list[Fraction]:
    """``B_0..B_kmax`` as exact fractions, with ``B_1 = -1/2``.

    Uses ``sum_{j=0}^{k} C(k+1, j) B_j = 0`` for ``k >= 1``.
    """
    if kmax < 0:
        raise ValueError("kmax must be >= 0")
    out = [Fraction(1)]
    for k in range(1, kmax + 1):
        s = sum(comb(k + 1, j) * out[j] for j in range(k))
        out.append(-s / (k + 1))
    return out


def phi_filter(y):
    """``i y / (exp(i y) - 1)``, equal to ``(y/2) cot(y/2) - i y/2``; ``phi(0) = 1``.

    Vectorized.  Raises ``FilterPoleError`` within ``POLE_GUARD`` of a nonzero
    multiple of ``2 pi``.
    """
    y = np.asarray(y, dtype=float)
    near = np.abs((y + np.pi) % (2 * np.pi) - np.pi)
    if np.any((near < POLE_GUARD) & (np.abs(y) >= POLE_GUARD)):
        raise FilterPoleError("filter evaluated at a pole (y in 2*pi*Z \\ {0})")
    half = 0.5 * y
    small = np.abs(half) < 1e-8
    safe = np.where(small, 1.0, half)
    re = np.where(small, 1.0 - half**2 / 3.0, safe / np.tan(safe))
    out = re - 1j * half
    return out if out.ndim else complex(out)


def phi_series(y, kmax: int = 40):
    """Truncated Bernoulli series ``sum_{k<=kmax} B_k (iy)^k / k!``."""
    y = np.asarray(y, dtype=float)
    total = np.zeros_like(y, dtype=complex)
    for k, b in enumerate(bernoulli(kmax)):
        if b:
            total = total + float(b) / math.factorial(k) * (1j * y) ** k
    return total


# ---------------------------------------------------------------------------
# CFL gate


@dataclass(frozen=True)
class CFLReport:
    ratio: float
    bound: float
    M: int
    passed: bool

    def __str__(self):
        verdict = "pass" if self.passed else "FAIL"
        return f"tau/h^2 = {self.ratio:.4g} vs bound 2pi/(3(2M+3)) = {self.bound:.4g} (M={self.M}): {verdict}"


def cfl_check(h: float, tau: float, M: int = 0) -> CFLReport:
    """Check ``(2M + 3) tau / h^2 < 2 pi / 3``."""
    if h <= 0 or tau <= 0 or M < 0:
        raise ValueError("cfl_check needs h > 0, tau > 0, M >= 0")
    ratio = tau / h**2
    bound = 2 * np.pi / (3 * (2 * M + 3))
    return CFLReport(ratio=float(ratio), bound=float(bound), M=int(M), passed=bool(ratio < bound))


def max_admissible_M(h: float, tau: float) -> int | None:
    """Largest ``M`` passing the gate, or ``None`` if even ``M = 0`` fails."""
    ratio = tau / h**2
    m = math.floor((2 * np.pi / (3 * ratio) - 3) / 2)
    while m >= 0 and not cfl_check(h, tau, m).passed:
        m -= 1
    return m if m >= 0 else None


# ---------------------------------------------------------------------------
# quartic form in sine modes


@dataclass(frozen=True)
class QuarticTable:
    """Nonzero quartic overlaps ``T_abcd`` (1-based mode labels) with resonance ``Omega``."""

    grid: GridSpec
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    overlap: np.ndarray
    resonance: np.ndarray

    def __len__(self):
        return len(self.overlap)


@lru_cache(maxsize=16)
def quartic_table(grid: GridSpec, odd_only: bool) -> QuarticTable:
    """Sparse ``T_abcd = h * sum_j v_a v_b v_c v_d`` from the product-to-sum rules.

    ``T_abcd = h/(2N) * sum eps_b eps_c eps_d`` over sign patterns with
    ``a + eps_b b + eps_c c + eps_d d = 0 (mod 2N)``, ``N = 2K+2``.  With
    ``odd_only`` only symmetric (odd) modes are enumerated.
    """
    N = grid.npoints + 1
    modes = np.arange(1, N, 2) if odd_only else np.arange(1, N)
    A, B, C = np.meshgrid(modes, modes, modes, indexing="ij")
    A, B, C = A.ravel(), B.ravel(), C.ravel()
    # a <= b: the form is symmetric in (a, b); doubled weight restores the rest
    keep = A <= B
    A, B, C = A[keep], B[keep], C[keep]
    mult_ab = np.where(A == B, 1.0, 2.0)
    parts = {k: [] for k in ("a", "b", "c", "d", "w")}
    allowed = np.zeros(N, dtype=bool)
    allowed[modes] = True
    for eb in (1, -1):
        for ec in (1, -1):
            partial = A + eb * B + ec * C
            for ed in (1, -1):
                D = (-ed * partial) % (2 * N)
                ok = (D >= 1) & (D <= N - 1)
                ok[ok] = allowed[D[ok]]
                if not np.any(ok):
                    continue
                parts["a"].append(A[ok])
                parts["b"].append(B[ok])
                parts["c"].append(C[ok])
                parts["d"].append(D[ok])
                parts["w"].append(eb * ec * ed * mult_ab[ok])
    a = np.concatenate(parts["a"])
    b = np.concatenate(parts["b"])
    c = np.concatenate(parts["c"])
    d = np.concatenate(parts["d"])
    w = np.concatenate(parts["w"]) * grid.h / (2 * N)
    # merge duplicate (a, b, c, d) hits from different sign patterns
    key = ((a * N + b) * N + c) * N + d
    uniq, inv = np.unique(key, return_inverse=True)
    wsum = np.bincount(inv, weights=w)
    nz = np.abs(wsum) > 1e-15 * grid.h
    uniq, wsum = uniq[nz], wsum[nz]
    d = uniq % N
    c = (uniq // N) % N
    b = (uniq // N**2) % N
    a = uniq // N**3
    om = np.concatenate(([0.0], grid.frequencies))
    res = om[a] + om[b] - om[c] - om[d]
    table = QuarticTable(grid, a.astype(np.int32), b.astype(np.int32), c.astype(np.int32),
                         d.astype(np.int32), wsum, res)
    for arr in (table.a, table.b, table.c, table.d, table.overlap, table.resonance):
        arr.setflags(write=False)
    return table


def _coefficients(f: LatticeField) -> tuple[np.ndarray, bool]:
    c = np.concatenate(([0.0], sine_transform(f.values)))
    # even modes of a symmetric field vanish identically
    return c, f.symmetric


def quartic_form(f: LatticeField, weights=None) -> complex:
    """``sum T_abcd * weight * c_a c_b conj(c_c c_d)``; with unit weights this is ``sum_j h |psi_j|^4``."""
    c, odd_only = _coefficients(f)
    table = quartic_table(f.grid, odd_only)
    w = table.overlap if weights is None else table.overlap * weights(table)
    mono = c[table.a] * c[table.b] * np.conj(c[table.c] * c[table.d])
    return complex(np.dot(w, mono))


@dataclass(frozen=True)
class FilterTable:
    """Filter values ``phi(-+ i tau Omega)`` for every monomial of the quartic table."""

    grid: GridSpec
    tau: float
    composition: str
    values: np.ndarray
    max_phase: float


@lru_cache(maxsize=16)
def filter_table(grid: GridSpec, tau: float, odd_only: bool, composition: str = "AP") -> FilterTable:
    table = quartic_table(grid, odd_only)
    sign = -1.0 if composition == "AP" else 1.0
    y = sign * tau * table.resonance
    max_phase = float(np.max(np.abs(y))) if len(y) else 0.0
    if max_phase >= 2 * np.pi:
        raise FilterPoleError(f"|tau*Omega| reaches {max_phase:.3f} >= 2pi; CFL gate violated")
    vals = phi_filter(y)
    vals.setflags(write=False)
    return FilterTable(grid, tau, composition, vals, max_phase)


def hz1_spectral(f: LatticeField, tau: float, composition: str = "AP") -> float:
    """Resummed first-order correction of the quartic energy, ``H_Z1``.

    ``composition`` is ``"AP"`` for kinetic o potential (potential applied
    first) and ``"PA"`` for the reverse order.  Reduces to ``H_P`` at
    ``tau = 0`` and on single-mode fields.
    """
    if composition not in ("AP", "PA"):
        raise ValueError("composition must be 'AP' or 'PA'")
    if tau == 0:
        return _potential_energy(f.values, f.grid.h)
    c, odd_only = _coefficients(f)
    table = quartic_table(f.grid, odd_only)
    filt = filter_table(f.grid, float(tau), odd_only, composition)
    mono = c[table.a] * c[table.b] * np.conj(c[table.c] * c[table.d])
    value = -0.5 * np.dot(table.overlap * filt.values, mono)
    return float(value.real)


def hz1_spectral_complex(f: LatticeField, tau: float, composition: str = "AP") -> complex:
    """As ``hz1_spectral`` but returning the raw complex sum (its imaginary part is roundoff)."""
    c, odd_only = _coefficients(f)
    table = quartic_table(f.grid, odd_only)
    filt = filter_table(f.grid, float(tau), odd_only, composition)
    mono = c[table.a] * c[table.b] * np.conj(c[table.c] * c[table.d])
    return complex(-0.5 * np.dot(table.overlap * filt.values, mono))


def hz1_truncated(f: LatticeField, tau: float, kmax: int, composition: str = "AP") -> float:
    """Bernoulli-truncated version of ``hz1_spectral`` (multipliers ``(-+ i tau Omega)^k``)."""
    sign = -1.0 if composition == "AP" else 1.0
    bern = [float(b) / math.factorial(k) for k, b in enumerate(bernoulli(kmax))]

    def weights(table):
        x = sign * 1j * tau * table.resonance
        return sum(bk * x**k for k, bk in enumerate(bern))

    return float((-0.5 * quartic_form(f, weights)).real)


# ---------------------------------------------------------------------------
# modified energy


@dataclass(frozen=True)
class ModifiedEnergyConfig:
    mode: str = "resummed_spectral"
    M: int = 0
    tau: float = 0.02
    composition: str = "AP"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.composition not in ("AP", "PA"):
            raise ValueError("composition must be 'AP' or 'PA'")
        if self.M < 0 or self.tau <= 0:
            raise ValueError("need M >= 0 and tau > 0")

    @classmethod
    def for_stepper(cls, kind: str, tau: float, mode: str = "resummed_spectral", M: int = 0):
        return cls(mode=mode, M=M, tau=tau, composition="PA" if kind == "lie_PA" else "AP")


def h_modified(f: LatticeField, config: ModifiedEnergyConfig) -> float:
    """First-order modified energy ``H_A + H_Z1`` (or its first-order expansion).

    Raises ``CFLViolation`` if ``(h, tau, M)`` fails the CFL gate.
    """
    gate = cfl_check(f.grid.h, config.tau, config.M)
    if not gate.passed:
        raise CFLViolation(str(gate))
    v, h = f.values, f.grid.h
    ha = _kinetic_energy(v, h)
    if config.mode == "first_order_physical":
        sign = 1.0 if config.composition == "AP" else -1.0
        return ha + _potential_energy(v, h) - 0.5 * sign * _bracket(v, h, config.tau)
    return ha + hz1_spectral(f, config.tau, config.composition)


def modified_energy_fn(grid: GridSpec, kind: str, tau: float, mode: str = "resummed_spectral"):
    """Callable for ``integrate`` sampling, or ``None`` when the gate fails or the stepper has none."""
    if kind not in ("lie_AP", "lie_PA") or not cfl_check(grid.h, tau, 0).passed:
        return None
    cfg = ModifiedEnergyConfig.for_stepper(kind, tau, mode=mode)
    return lambda f: h_modified(f, cfg)


# ---------------------------------------------------------------------------
# drift


DRIFT_COLUMNS = ("step", "t", "N_h", "H_h", "H_mod", "dN", "dH", "dHmod")


@dataclass
class DriftReport:
    steps: np.ndarray
    times: np.ndarray
    series: dict
    drifts: dict
    summary: dict = field(default_factory=dict)

    def rows(self):
        for i in range(len(self.steps)):
            yield (int(self.steps[i]), float(self.times[i]),
                   self.series["N_h"][i], self.series["H_h"][i], self.series["H_mod"][i],
                   self.drifts["N_h"][i], self.drifts["H_h"][i], self.drifts["H_mod"][i])

    def write_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DRIFT_COLUMNS)
            for row in self.rows():
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
        return path


def drift_report(record, config: ModifiedEnergyConfig | None = None) -> DriftReport:
    """Max, terminal and per-step drift of ``N_h``, ``H_h`` and the modified energy.

    The modified energy is read from the samples (``H_modified``); runs
    sampled without it get NaN in those columns.  ``config`` only labels the
    summary.
    """
    if not record.reports:
        raise ValueError("record has no energy samples")
    steps = np.asarray(record.steps, dtype=int)
    times = np.asarray(record.times, dtype=float)
    series = {
        "N_h": record.series("N_h"),
        "H_h": record.series("H_h"),
        "H_mod": record.series("H_modified"),
    }
    drifts = {k: s - s[0] for k, s in series.items()}
    summary = {}
    dsteps = np.diff(steps)
    for k, dr in drifts.items():
        ref = abs(series[k][0]) if series[k][0] != 0 else 1.0
        finite = dr[np.isfinite(dr)]
        if len(finite) == 0:
            summary[k] = {"max": float("nan"), "terminal": float("nan"), "per_step": float("nan"),
                          "max_rel": float("nan"), "terminal_rel": float("nan")}
            continue
        per_step = (np.max(np.abs(np.diff(series[k])) / dsteps) if len(dsteps) else 0.0)
        summary[k] = {
            "max": float(np.max(np.abs(finite))),
            "terminal": float(abs(dr[-1])),
            "per_step": float(per_step),
            "max_rel": float(np.max(np.abs(finite)) / ref),
            "terminal_rel": float(abs(dr[-1]) / ref),
        }
    if config is not None:
        summary["config"] = {"mode": config.mode, "tau": config.tau, "composition": config.composition}
    return DriftReport(steps=steps, times=times, series=series, drifts=drifts, summary=summary)
