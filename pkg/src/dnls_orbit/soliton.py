"""Continuous soliton profile and the discrete soliton as a constrained energy minimizer."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import (
    DEFAULT_CONVENTION,
    ContinuousSampler,
    GridSpec,
    LatticeField,
    mirror,
    project,
    seminorm_weight,
    sine_transform,
)
from .observables import C1_DEFAULT, NU_DEFAULT, _kinetic_energy, _mass, _potential_energy

log = logging.getLogger(__name__)

LAMBDA_CONTINUUM = 0.25
MIN_MASS_TARGET = 1e-8


class SolitonConvergenceError(RuntimeError):
    """Raised when the minimizer stalls; carries the best iterate."""

    def __init__(self, message, pack=None):
        super().__init__(message)
        self.pack = pack


def eta(x):
    """``sech(x/2) / sqrt(2)``: solves ``-eta'' - eta**3 = -eta/4``."""
    a = np.exp(-np.abs(np.asarray(x, dtype=float)) / 2.0)
    # sech(x/2) = 2 e^{-|x|/2} / (1 + e^{-|x|}), free of overflow
    return np.sqrt(0.5) * 2.0 * a / (1.0 + a * a)


def eta_second_derivative(x):
    x = np.asarray(x, dtype=float)
    s = np.sqrt(2.0) * eta(x)
    t = np.tanh(x / 2.0)
    return np.sqrt(0.5) * 0.25 * (s * t**2 - s**3)


def eta_sampler(c1: float = C1_DEFAULT, nu: float = NU_DEFAULT) -> ContinuousSampler:
    return ContinuousSampler(eta, decay=(c1, nu), name="eta")


@dataclass(frozen=True)
class SolitonPack:
    profile: ContinuousSampler
    sampled: LatticeField
    discrete: LatticeField
    lambda_mu: float
    mass_target: float
    kkt_residual: float
    iterations: int
    converged: bool
    energies: tuple = ()


def _h_energy(v, h):
    return _kinetic_energy(v, h) + _potential_energy(v, h)


def _renormalize(v, h, target):
    return v * np.sqrt(target / _mass(v, h))


def discrete_soliton(grid: GridSpec, mass_target: float | None = None, tol: float = 1e-10,
                     maxit: int = 100_000, convention=DEFAULT_CONVENTION,
                     initial: LatticeField | None = None, log_path: str | Path | None = None,
                     strict: bool = True) -> SolitonPack:
    """Minimize ``H_h`` on the sphere ``N_h = mass_target`` by normalized gradient descent.

    The descent direction is the gradient in the mu inner product (the
    h-gradient preconditioned by ``(1 - w*Delta_h)^{-1}``, diagonal in the
    sine basis), projected onto the tangent of the mass sphere.  Steps are
    retracted onto the sphere by rescaling and accepted under an Armijo test
    on ``H_h``.  Iteration stops when the mu-norm of the projected gradient
    drops below ``tol``.

    With ``strict`` (default) a ``SolitonConvergenceError`` carrying the best
    iterate is raised after ``maxit`` iterations; otherwise the unconverged
    pack is returned.
    """
    profile = eta_sampler()
    sampled = project(profile, grid)
    if mass_target is None:
        mass_target = _mass(sampled.values, grid.h)
    if not mass_target > MIN_MASS_TARGET:
        raise ValueError(f"mass target must exceed {MIN_MASS_TARGET}, got {mass_target}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    h = grid.h
    w = seminorm_weight(convention)
    precond = 1.0 / (1.0 + w * grid.frequencies)
    start = sampled if initial is None else initial
    v = _renormalize(mirror(np.real(start.values)).astype(float), h, mass_target)
    energy = _h_energy(v, h)

    def gradients(v):
        pad = np.concatenate(([0.0], v, [0.0]))
        lap = (pad[2:] + pad[:-2] - 2 * v) / h**2
        g_h = -2.0 * lap - 2.0 * v**3
        g_n = 2.0 * v
        # mu-Riesz representers
        r_h = sine_transform(precond * sine_transform(g_h))
        r_n = sine_transform(precond * sine_transform(g_n))
        coef = h * np.dot(g_h, r_n) / (h * np.dot(g_n, r_n))
        proj = r_h - coef * r_n
        # mu-norm of the projected Riesz vector equals sqrt(<g_proj, proj>_h)
        gnorm = np.sqrt(max(h * np.dot(g_h - coef * g_n, proj), 0.0))
        return proj, gnorm, g_h, g_n

    # preconditioned Hessian eigenvalues are <= 2, so steps up to 1 stay stable
    max_step = 1.0
    step = 0.5
    history = [energy]
    writer = None
    fh = None
    if log_path is not None:
        fh = open(log_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy", "residual"])
    try:
        converged = False
        it = 0
        for it in range(1, maxit + 1):
            direction, gnorm, g_h, g_n = gradients(v)
            if writer is not None:
                writer.writerow([it - 1, repr(float(energy)), repr(float(gnorm))])
            if gnorm <= tol:
                converged = True
                it -= 1
                break
            slope = gnorm**2
            while True:
                trial = mirror(_renormalize(v - step * direction, h, mass_target))
                e_trial = _h_energy(trial, h)
                # slack: near convergence the decrease is below energy roundoff
                slack = 8 * np.finfo(float).eps * (abs(energy) + _kinetic_energy(v, h))
                if e_trial <= energy - 1e-4 * step * slope + slack or step < 1e-14:
                    break
                step *= 0.5
            if e_trial > energy + slack:
                # descent failed even at negligible step: roundoff floor reached
                log.debug("line search stalled at residual %.3e", gnorm)
                break
            v, energy = trial, e_trial
            history.append(energy)
            step = min(step * 1.5, max_step)
        direction, gnorm, g_h, g_n = gradients(v)
        converged = converged or gnorm <= tol
    finally:
        if fh is not None:
            fh.close()

    lam = -np.dot(g_h, g_n) / np.dot(g_n, g_n)
    kkt = float(np.sqrt(h * np.sum((g_h + lam * g_n) ** 2)))
    pack = SolitonPack(
        profile=profile,
        sampled=sampled,
        discrete=LatticeField(grid, v, symmetric=True),
        lambda_mu=float(lam),
        mass_target=float(mass_target),
        kkt_residual=float(gnorm),
        iterations=it,
        converged=converged,
        energies=tuple(history),
    )
    if not converged and strict:
        raise SolitonConvergenceError(
            f"no convergence after {it} iterations (residual {gnorm:.3e} > tol {tol:.1e})", pack
        )
    log.info("discrete soliton: h=%g K=%d lambda=%.10f residual=%.2e after %d iterations (kkt %.2e)",
             h, grid.K, lam, gnorm, it, kkt)
    return pack
