"""Lattice geometry, field storage and the discrete operators on it.

Fields live on the interior points ``j = -K..K`` of a uniform grid with
spacing ``h``; the values at ``j = +-(K+1)`` are implicitly zero (Dirichlet).
The finite-difference Laplacian is diagonal in the orthonormal sine basis

    v_k(j) = sqrt(2/(2K+2)) * sin(k*pi*(j+K+1)/(2K+2)),   k = 1..2K+1,

with eigenvalues ``-omega_k``.  Sine transforms go through ``scipy.fft.dst``
(type I, orthonormal), which is exactly this basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft

SEMINORM_WEIGHTS = {"fe-exact": 1.0, "doubled": 2.0}
DEFAULT_CONVENTION = "fe-exact"


def seminorm_weight(convention: str | float) -> float:
    if isinstance(convention, (int, float)):
        return float(convention)
    try:
        return SEMINORM_WEIGHTS[convention]
    except KeyError:
        raise ValueError(
            f"unknown norm convention {convention!r}; "
            f"expected one of {sorted(SEMINORM_WEIGHTS)}"
        ) from None


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of ``2K+1`` interior points with spacing ``h``."""

    h: float
    K: int

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise ValueError(f"grid spacing must be positive, got h={self.h}")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"half-width must be an integer >= 1, got K={self.K}")
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "K", int(self.K))

    @property
    def npoints(self) -> int:
        return 2 * self.K + 1

    @property
    def half_width(self) -> float:
        """Half-window width ``K*h``."""
        return self.K * self.h

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.K, self.K + 1)

    @property
    def x(self) -> np.ndarray:
        return self.indices * self.h

    @cached_property
    def frequencies(self) -> np.ndarray:
        """``omega_k`` for ``k = 1..2K+1`` (eigenvalues of ``-Delta_h``)."""
        k = np.arange(1, self.npoints + 1)
        return 4.0 / self.h**2 * np.sin(k * np.pi / (2 * (2 * self.K + 2))) ** 2

    @cached_property
    def sine_matrix(self) -> np.ndarray:
        """Orthogonal matrix whose row ``k-1`` is ``v_k`` sampled on the grid."""
        n1 = self.npoints + 1
        k = np.arange(1, self.npoints + 1)
        s = np.arange(1, self.npoints + 1)
        m = np.sqrt(2.0 / n1) * np.sin(np.pi * np.outer(k, s) / n1)
        m.setflags(write=False)
        return m

    def eigenmode(self, k: int) -> "LatticeField":
        """Unit (unweighted Euclidean norm) eigenvector ``v_k``."""
        _check_mode(self, k)
        row = self.sine_matrix[k - 1]
        if k % 2 == 1:
            # odd modes are even in j; make that bitwise
            return LatticeField(self, mirror(row), symmetric=True)
        return LatticeField(self, row)

    def zeros(self) -> "LatticeField":
        return LatticeField(self, np.zeros(self.npoints, dtype=complex), symmetric=True)

    def __hash__(self):
        return hash((self.h, self.K))


def _check_mode(grid: GridSpec, k: int) -> None:
    if int(k) != k or not 1 <= k <= grid.npoints:
        raise IndexError(f"mode index {k} outside 1..{grid.npoints}")


def mirror(values: np.ndarray) -> np.ndarray:
    """Symmetrize ``values`` so that ``v[j] == v[-j]`` holds bitwise."""
    return 0.5 * (values + values[::-1])


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Complex amplitudes on the interior points of ``grid``.

    ``values`` is stored as a read-only complex array of length ``2K+1``.
    With ``symmetric=True`` the mirror symmetry ``psi_j == psi_{-j}`` is
    checked exactly at construction.  ``diverged`` allows non-finite values
    (used to report blown-up states).
    """

    grid: GridSpec
    values: np.ndarray
    symmetric: bool = False
    diverged: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=complex, copy=True)
        if v.shape != (self.grid.npoints,):
            raise ValueError(
                f"expected {self.grid.npoints} values for K={self.grid.K}, got shape {v.shape}"
            )
        if not self.diverged and not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if self.symmetric and not np.array_equal(v, v[::-1]):
            raise ValueError("field flagged symmetric but psi_j != psi_-j")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def symmetrized(cls, grid: GridSpec, values) -> "LatticeField":
        return cls(grid, mirror(np.asarray(values, dtype=complex)), symmetric=True)

    def with_values(self, values: np.ndarray) -> "LatticeField":
        """New field on the same grid; symmetry is re-imposed if this one is symmetric."""
        if self.symmetric:
            values = mirror(values)
        return LatticeField(self.grid, values, symmetric=self.symmetric)

    # arithmetic keeps code in the other modules readable
    def __add__(self, other):
        _same_grid(self, other)
        return LatticeField(
            self.grid, self.values + other.values, symmetric=self.symmetric and other.symmetric
        )

    def __sub__(self, other):
        _same_grid(self, other)
        return LatticeField(
            self.grid, self.values - other.values, symmetric=self.symmetric and other.symmetric
        )

    def __mul__(self, scalar):
        if isinstance(scalar, LatticeField):
            return NotImplemented
        return LatticeField(self.grid, complex(scalar) * self.values, symmetric=self.symmetric)

    __rmul__ = __mul__

    def __neg__(self):
        return LatticeField(self.grid, -self.values, symmetric=self.symmetric)

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0))


def _same_grid(f: LatticeField, g: LatticeField) -> None:
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")


@dataclass(frozen=True, eq=False)
class SineSpectrum:
    """Coefficients ``c_k`` (k = 1..2K+1) in the orthonormal sine basis."""

    grid: GridSpec
    coeffs: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        if c.shape != (self.grid.npoints,):
            raise ValueError(f"expected {self.grid.npoints} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies


@dataclass(frozen=True)
class ContinuousSampler:
    """A symmetric function of ``x`` with an exponential decay bound.

    ``decay = (C1, nu)`` records ``|f(x)| <= C1 * exp(-nu*|x|)``.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    decay: tuple[float, float] = (np.inf, 0.0)
    name: str = ""

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def decay_bound(self, x) -> np.ndarray:
        c1, nu = self.decay
        return c1 * np.exp(-nu * np.abs(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# array kernels (shared with the integrators, which avoid object churn)


def sine_transform(values: np.ndarray) -> np.ndarray:
    """Orthonormal DST-I; it is its own inverse."""
    return scipy.fft.dst(values, type=1, norm="ortho")


def laplacian_values(v: np.ndarray, h: float) -> np.ndarray:
    padded = np.concatenate(([0.0], v, [0.0]))
    return (padded[2:] + padded[:-2] - 2.0 * v) / h**2


def forward_differences(v: np.ndarray) -> np.ndarray:
    """``psi_{j+1} - psi_j`` for ``j = -K-1..K``, including both boundary jumps."""
    padded = np.concatenate(([0.0], v, [0.0]))
    return np.diff(padded)


# ---------------------------------------------------------------------------
# public operations


def laplacian(f: LatticeField) -> LatticeField:
    """Three-point Laplacian with zero Dirichlet extension."""
    return LatticeField(f.grid, laplacian_values(f.values, f.grid.h), symmetric=f.symmetric)


def dst_forward(f: LatticeField) -> SineSpectrum:
    return SineSpectrum(f.grid, sine_transform(f.values), symmetric=f.symmetric)


def dst_inverse(s: SineSpectrum) -> LatticeField:
    values = sine_transform(s.coeffs)
    if s.symmetric:
        values = mirror(values)
    return LatticeField(s.grid, values, symmetric=s.symmetric)


def omega(grid: GridSpec, k: int) -> float:
    """Eigenvalue of ``-Delta_h`` on mode ``k``."""
    _check_mode(grid, k)
    return float(grid.frequencies[k - 1])


def mass_inner(f: LatticeField, g: LatticeField) -> complex:
    """``h * sum f_j conj(g_j)``; its real part is the real pairing <f, g>_h."""
    _same_grid(f, g)
    return complex(f.grid.h * np.vdot(g.values, f.values))


def energy_inner(f: LatticeField, g: LatticeField, convention=DEFAULT_CONVENTION) -> complex:
    """Mass pairing plus the weighted difference pairing; ``energy_inner(f, f) = norm_mu(f)**2``."""
    _same_grid(f, g)
    h = f.grid.h
    w = seminorm_weight(convention)
    df = forward_differences(f.values)
    dg = forward_differences(g.values)
    return complex(h * np.vdot(g.values, f.values) + w * np.vdot(dg, df) / h)


def norm_mu(f: LatticeField, convention=DEFAULT_CONVENTION) -> float:
    h = f.grid.h
    w = seminorm_weight(convention)
    d = forward_differences(f.values)
    sq = w * np.sum(np.abs(d) ** 2) / h + h * np.sum(np.abs(f.values) ** 2)
    return float(np.sqrt(sq))


def fe_h1_norm(f: LatticeField) -> float:
    """Exact H^1(R) norm of the piecewise-linear interpolant of ``f``."""
    h = f.grid.h
    padded = np.concatenate(([0.0], f.values, [0.0]))
    a, b = padded[:-1], padded[1:]
    deriv = np.sum(np.abs(b - a) ** 2) / h
    mass = h / 3.0 * np.sum(np.abs(a) ** 2 + np.abs(b) ** 2 + np.real(a * np.conj(b)))
    return float(np.sqrt(deriv + mass))


def interpolate(f: LatticeField, x) -> np.ndarray:
    """Evaluate the piecewise-linear interpolant ``i_h f`` at points ``x``."""
    g = f.grid
    xs = np.concatenate(([-(g.K + 1) * g.h], g.x, [(g.K + 1) * g.h]))
    padded = np.concatenate(([0.0], f.values, [0.0]))
    x = np.asarray(x, dtype=float)
    re = np.interp(x, xs, padded.real, left=0.0, right=0.0)
    im = np.interp(x, xs, padded.imag, left=0.0, right=0.0)
    return re + 1j * im


def project(sampler: ContinuousSampler, grid: GridSpec) -> LatticeField:
    """Pointwise sampling ``psi_j = f(jh)`` on the window, zero outside."""
    x = grid.x
    values = np.asarray(sampler(x), dtype=complex)
    symmetric = np.array_equal(values, values[::-1])
    return LatticeField(grid, values, symmetric=symmetric)


def tail_norm_sq(sampler: ContinuousSampler, grid: GridSpec, convention=DEFAULT_CONVENTION,
                 cutoff: float | None = None) -> float:
    """Squared mu-norm of the samples lost by the cut-off, ``pi_{h,K} f - pi_h f``.

    The infinite lattice is truncated where the decay bound drops below
    machine precision (or at ``cutoff`` if given).
    """
    h, K = grid.h, grid.K
    c1, nu = sampler.decay
    if cutoff is None:
        if nu <= 0 or not np.isfinite(c1):
            raise ValueError("sampler needs a decay bound to estimate the tail")
        cutoff = (np.log(max(c1, 1.0)) + 40.0) / nu
    jmax = max(int(np.ceil(cutoff / h)), K + 2)
    j = np.arange(K + 1, jmax + 1)
    vals = np.asarray(sampler(j * h), dtype=complex)
    # one side; the difference field is zero on |j| <= K and mirrors
    diffs = np.diff(np.concatenate(([0.0], vals)))
    w = seminorm_weight(convention)
    one_side = w * np.sum(np.abs(diffs) ** 2) / h + h * np.sum(np.abs(vals) ** 2)
    return float(2.0 * one_side)


def discrete_sobolev_constant(h: float) -> float:
    """``4/h**2 + 1``, bounding ``norm_mu(f)**2`` by that times the discrete mass."""
    return 4.0 / h**2 + 1.0


def operator_norm_estimate(grid: GridSpec, tau: float, convention=DEFAULT_CONVENTION,
                           iterations: int = 500, seed: int = 0) -> float:
    """Power-iteration estimate of the mu-operator norm of ``psi -> tau * Delta_h psi``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.npoints) + 1j * rng.standard_normal(grid.npoints)
    f = LatticeField(grid, v)
    f = (1.0 / norm_mu(f, convention)) * f
    est = 0.0
    for _ in range(iterations):
        g = tau * laplacian(f)
        est = norm_mu(g, convention)
        if est == 0.0:
            return 0.0
        # power iteration on T^* T in the mu inner product; Delta_h is self-adjoint
        # in both pairings, so T^* T = T^2 and one more application suffices
        g2 = tau * laplacian(g)
        f = (1.0 / norm_mu(g2, convention)) * g2
    return float(est)
