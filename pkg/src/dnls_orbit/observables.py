"""Energies, mass, gradients and the orbit chart around a reference soliton.

Gradients are taken with respect to the real pairing
``<f, g>_h = Re(h * sum f_j conj(g_j))``, so that the DNLS flow reads
``i d/dt psi = grad_h(psi) / 2``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .lattice import (
    DEFAULT_CONVENTION,
    GridSpec,
    LatticeField,
    energy_inner,
    forward_differences,
    laplacian_values,
    mass_inner,
    norm_mu,
    _same_grid,
)

NU_DEFAULT = 0.5
C1_DEFAULT = float(np.sqrt(2.0))


class ChartDomainError(ValueError):
    """The field is too far from the reference orbit for the chart."""


# ---------------------------------------------------------------------------
# array kernels


def _kinetic_energy(v: np.ndarray, h: float) -> float:
    return float(np.sum(np.abs(forward_differences(v)) ** 2) / h)


def _potential_energy(v: np.ndarray, h: float) -> float:
    return float(-0.5 * h * np.sum(np.abs(v) ** 4))


def _mass(v: np.ndarray, h: float) -> float:
    return float(h * np.sum(np.abs(v) ** 2))


def _bracket(v: np.ndarray, h: float, tau: float) -> float:
    lap = laplacian_values(v, h)
    return float(2.0 * tau * h * np.sum(np.imag(lap * np.abs(v) ** 2 * np.conj(v))))


# ---------------------------------------------------------------------------
# energies


def hamiltonian_h(f: LatticeField) -> float:
    """``h * sum |(psi_j - psi_{j-1})/h|^2 - |psi_j|^4 / 2`` with zero extension."""
    return _kinetic_energy(f.values, f.grid.h) + _potential_energy(f.values, f.grid.h)


def mass_h(f: LatticeField) -> float:
    return _mass(f.values, f.grid.h)


def split_energies(f: LatticeField) -> tuple[float, float]:
    """Kinetic part ``H_A >= 0`` and quartic part ``H_P <= 0``."""
    return _kinetic_energy(f.values, f.grid.h), _potential_energy(f.values, f.grid.h)


def grad_h(f: LatticeField) -> LatticeField:
    v, h = f.values, f.grid.h
    return LatticeField(f.grid, -2.0 * laplacian_values(v, h) - 2.0 * np.abs(v) ** 2 * v,
                        symmetric=f.symmetric)


def grad_mass(f: LatticeField) -> LatticeField:
    return 2.0 * f


def bracket_energy(f: LatticeField, tau: float) -> float:
    """First-order splitting correction ``tau * {H_P, H_A}``.

    This is ``tau`` times the rate of change of ``H_P`` along the kinetic
    flow, ``2*tau*h * sum Im(Delta_h psi_l * |psi_l|^2 * conj(psi_l))``.
    It vanishes on real fields and is linear in ``tau``.
    """
    return _bracket(f.values, f.grid.h, tau)


def poisson_bracket(grad_f: LatticeField, grad_g: LatticeField) -> float:
    """``{F, G}`` from the h-pairing gradients of ``F`` and ``G``.

    With ``i psi' = grad G / 2`` as the flow of ``G``, the derivative of ``F``
    along it is ``(h/2) * Im sum conj(grad F) * grad G``.
    """
    _same_grid(grad_f, grad_g)
    h = grad_f.grid.h
    return float(0.5 * h * np.imag(np.vdot(grad_f.values, grad_g.values)))


# ---------------------------------------------------------------------------
# orbit and chart


@dataclass(frozen=True)
class OrbitChart:
    """Coordinates ``psi = exp(i*alpha) * ((1 + r) * reference + u)``.

    ``reference`` has unit discrete mass and ``u`` is orthogonal to both
    ``reference`` and ``i * reference`` in the real pairing.
    """

    reference: LatticeField
    alpha: float
    r: float
    u: LatticeField

    def reconstruct(self) -> LatticeField:
        return cmath.exp(1j * self.alpha) * ((1.0 + self.r) * self.reference + self.u)


@dataclass(frozen=True)
class EnergyReport:
    H_h: float
    N_h: float
    H_A: float
    H_P: float
    H_bracket: float
    H_modified: float
    dist: float
    chart: OrbitChart | None = None
    max_abs: float = float("nan")


def unit_mass(reference: LatticeField) -> LatticeField:
    return (1.0 / np.sqrt(mass_h(reference))) * reference


def orbit_distance(f: LatticeField, reference: LatticeField,
                   convention=DEFAULT_CONVENTION) -> tuple[float, float]:
    """Distance from ``f`` to ``{exp(i*a) * reference}`` in the mu-norm, and the minimizing phase."""
    _same_grid(f, reference)
    p = energy_inner(f, reference, convention)
    nf = norm_mu(f, convention) ** 2
    nr = norm_mu(reference, convention) ** 2
    d2 = nf + nr - 2.0 * abs(p)
    dist = float(np.sqrt(max(d2, 0.0)))
    alpha = cmath.phase(p) % (2 * np.pi) if p != 0 else 0.0
    return dist, float(alpha)


def orbit_coordinates(f: LatticeField, reference: LatticeField) -> OrbitChart:
    """Phase, radial and transversal coordinates of ``f`` around ``reference``.

    The reference is rescaled to unit discrete mass first.  Raises
    ``ChartDomainError`` when ``|z(f)| < 1/2``.
    """
    _same_grid(f, reference)
    ref = unit_mass(reference)
    z = mass_inner(f, ref)
    if abs(z) < 0.5:
        raise ChartDomainError(f"|z| = {abs(z):.3g} < 1/2: field outside the chart domain")
    alpha = cmath.phase(z) % (2 * np.pi)
    r = abs(z) - 1.0
    u = cmath.exp(-1j * alpha) * f - (1.0 + r) * ref
    return OrbitChart(reference=ref, alpha=float(alpha), r=float(r), u=u)


def r_of_u(u: LatticeField, reference: LatticeField) -> float:
    """Radial coordinate that puts ``(1 + r) * reference + u`` on the reference mass shell.

    ``u`` is expected to be transversal (orthogonal to ``reference`` and
    ``i * reference``).
    """
    _same_grid(u, reference)
    radicand = 1.0 - mass_h(u) / mass_h(reference)
    if radicand <= 0:
        raise ChartDomainError(f"mass of u exceeds reference mass (radicand {radicand:.3g})")
    return float(-1.0 + np.sqrt(radicand))


def chart_point(u: LatticeField, reference: LatticeField, alpha: float = 0.0) -> LatticeField:
    r = r_of_u(u, reference)
    return cmath.exp(1j * alpha) * ((1.0 + r) * reference + u)


def reduced_hamiltonian(u: LatticeField, reference: LatticeField) -> float:
    """Energy restricted to the mass shell, as a function of the transversal coordinate."""
    return hamiltonian_h(chart_point(u, reference))


def transversal_projection(v: LatticeField, reference: LatticeField) -> LatticeField:
    """Remove the ``reference`` and ``i * reference`` components of ``v`` (real pairing)."""
    ref = unit_mass(reference)
    z = mass_inner(v, ref)
    # Re and Im of z are the two real components along ref and i*ref
    return v - z * ref


def transversal_basis(reference: LatticeField, symmetric: bool = True) -> list[LatticeField]:
    """Real orthonormal basis (in the h-pairing) of the transversal space.

    Spans symmetric fields when ``symmetric`` is set; real and imaginary
    directions are both included.
    """
    grid = reference.grid
    n = grid.npoints
    K = grid.K
    cols = []
    if symmetric:
        for j in range(K + 1):
            e = np.zeros(n)
            e[K + j] = 1.0
            e[K - j] = 1.0
            cols.append(e)
    else:
        cols = list(np.eye(n))
    raw = [c.astype(complex) for c in cols] + [1j * c.astype(complex) for c in cols]
    ref = unit_mass(reference).values
    # real coordinates: stack (Re, Im) so the h-pairing becomes h * dot
    def to_real(v):
        return np.concatenate((v.real, v.imag))

    mat = np.array([to_real(v) for v in raw]).T
    constraints = np.array([to_real(ref), to_real(1j * ref)]).T
    # project out the two constraint directions then orthonormalize
    q_c, _ = np.linalg.qr(constraints)
    mat = mat - q_c @ (q_c.T @ mat)
    u_svd, s, _ = np.linalg.svd(mat, full_matrices=False)
    keep = s > 1e-10 * s[0]
    basis_real = u_svd[:, keep] / np.sqrt(grid.h)
    out = []
    for col in basis_real.T:
        vals = col[:n] + 1j * col[n:]
        out.append(LatticeField(grid, vals))
    return out


def epsilon_mu(h: float, K: int, tau: float = 0.0, nu: float = NU_DEFAULT) -> float:
    """``h + exp(-nu*K*h)/h**2 + tau/h``."""
    if h <= 0 or K <= 0 or tau < 0 or nu <= 0:
        raise ValueError("epsilon_mu needs positive h, K, nu and tau >= 0")
    return float(h + np.exp(-nu * K * h) / h**2 + tau / h)
