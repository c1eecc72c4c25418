"""Time steppers for the Dirichlet DNLS and the integration loop.

Kinds of one-step maps (``tau`` is the time step):

``lie_AP``          kinetic(tau) o potential(tau)   (potential flow first)
``lie_PA``          potential(tau) o kinetic(tau)
``taylor2_then_P``  second-order Taylor kinetic propagator o potential(tau);
                    not symplectic, grows the mass
``dfp``             mass- and energy-conserving Crank-Nicolson variant,
                    solved by fixed-point iteration
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lattice import GridSpec, LatticeField, mirror, sine_transform
from .observables import (
    EnergyReport,
    OrbitChart,
    ChartDomainError,
    _bracket,
    _kinetic_energy,
    _mass,
    _potential_energy,
    orbit_coordinates,
    orbit_distance,
)

log = logging.getLogger(__name__)

STEPPER_KINDS = ("lie_AP", "lie_PA", "taylor2_then_P", "dfp")
COMPLETED, BLOWUP, DFP_FAILURE = "completed", "blowup", "dfp_failure"


class DFPFailure(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class StepperConfig:
    kind: str = "lie_AP"
    tau: float = 0.02
    dfp_tol: float = 1e-13
    dfp_maxit: int = 100
    blowup_threshold: float = 1e3

    def __post_init__(self):
        if self.kind not in STEPPER_KINDS:
            raise ValueError(f"unknown stepper kind {self.kind!r}; choose from {STEPPER_KINDS}")
        if not self.tau > 0:
            raise ValueError(f"time step must be positive, got {self.tau}")
        if not self.dfp_tol > 0:
            raise ValueError("dfp_tol must be positive")


# ---------------------------------------------------------------------------
# flows on raw arrays


def _potential(v: np.ndarray, tau: float) -> np.ndarray:
    return np.exp(1j * tau * (v.real**2 + v.imag**2)) * v


def _spectral(v: np.ndarray, multiplier: np.ndarray) -> np.ndarray:
    return sine_transform(multiplier * sine_transform(v))


def kinetic_multiplier(grid: GridSpec, tau: float) -> np.ndarray:
    return np.exp(-1j * tau * grid.frequencies)


def taylor2_multiplier(grid: GridSpec, tau: float) -> np.ndarray:
    x = tau * grid.frequencies
    return 1.0 - 1j * x - 0.5 * x**2


def _wrap(f: LatticeField, values: np.ndarray) -> LatticeField:
    if f.symmetric:
        values = mirror(values)
    return LatticeField(f.grid, values, symmetric=f.symmetric)


def potential_flow(f: LatticeField, tau: float) -> LatticeField:
    """Exact flow of ``i psi' = -|psi|^2 psi``: a pointwise phase rotation."""
    return LatticeField(f.grid, _potential(f.values, tau), symmetric=f.symmetric)


def kinetic_flow(f: LatticeField, tau: float) -> LatticeField:
    """Exact flow of ``i psi' = -Delta_h psi``; mode ``k`` picks up ``exp(-i tau omega_k)``."""
    if tau == 0:
        return f
    return _wrap(f, _spectral(f.values, kinetic_multiplier(f.grid, tau)))


def taylor2_kinetic(f: LatticeField, tau: float) -> LatticeField:
    """``(1 + tau L + tau^2 L^2 / 2) psi`` with ``L psi = i Delta_h psi``."""
    if tau == 0:
        return f
    return _wrap(f, _spectral(f.values, taylor2_multiplier(f.grid, tau)))


class _DFPSolver:
    """Fixed-point solver for one DFP step with the linear part inverted exactly."""

    def __init__(self, grid: GridSpec, tau: float, tol: float, maxit: int):
        self.grid, self.tau, self.tol, self.maxit = grid, tau, tol, maxit
        half = 0.5j * tau * grid.frequencies
        # (1 - i tau/2 Delta)^{-1} and (1 + i tau/2 Delta) in sine space
        self.inv = 1.0 / (1.0 + half)
        self.explicit = (1.0 - half) * self.inv
        self.h = grid.h
        self.last_iterations = 0
        self.last_residual = 0.0

    def _mu_norm(self, v):
        pad = np.concatenate(([0.0], v, [0.0]))
        d = np.diff(pad)
        return math.sqrt(np.sum(np.abs(d) ** 2) / self.h + self.h * np.sum(np.abs(v) ** 2))

    def step(self, v: np.ndarray) -> np.ndarray:
        lin = _spectral(v, self.explicit)
        abs_old = v.real**2 + v.imag**2
        new = v
        for it in range(1, self.maxit + 1):
            nonlin = 0.25j * self.tau * (new.real**2 + new.imag**2 + abs_old) * (new + v)
            nxt = lin + sine_transform(self.inv * sine_transform(nonlin))
            res = self._mu_norm(nxt - new)
            new = nxt
            if not np.isfinite(res):
                break
            if res <= self.tol:
                self.last_iterations, self.last_residual = it, res
                return new
        self.last_iterations, self.last_residual = self.maxit, res
        raise DFPFailure(f"DFP fixed point not reached in {self.maxit} iterations "
                         f"(last residual {res:.3e})", res)


def dfp_step(f: LatticeField, tau: float, tol: float = 1e-13, maxit: int = 100) -> LatticeField:
    """One step of the conservative Crank-Nicolson scheme

    ``psi+ = psi + (i tau/2) Delta_h(psi+ + psi) + (i tau/4)(|psi+|^2 + |psi|^2)(psi+ + psi)``.

    The linear part is inverted in sine space and the cubic term is iterated
    to a fixed point until successive iterates differ by less than ``tol`` in
    the mu-norm.  Raises ``DFPFailure`` otherwise.
    """
    if tau == 0:
        return f
    solver = _DFPSolver(f.grid, tau, tol, maxit)
    return _wrap(f, solver.step(f.values))


def make_step(grid: GridSpec, config: StepperConfig) -> Callable[[np.ndarray], np.ndarray]:
    """Array-level one-step map for ``config``."""
    tau = config.tau
    if config.kind == "lie_AP":
        mult = kinetic_multiplier(grid, tau)
        return lambda v: _spectral(_potential(v, tau), mult)
    if config.kind == "lie_PA":
        mult = kinetic_multiplier(grid, tau)
        return lambda v: _potential(_spectral(v, mult), tau)
    if config.kind == "taylor2_then_P":
        mult = taylor2_multiplier(grid, tau)
        return lambda v: _spectral(_potential(v, tau), mult)
    solver = _DFPSolver(grid, tau, config.dfp_tol, config.dfp_maxit)
    return solver.step


# ---------------------------------------------------------------------------
# integration loop


@dataclass
class TrajectoryRecord:
    config: StepperConfig
    grid: GridSpec
    steps: list = field(default_factory=list)
    times: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    status: str = COMPLETED
    final_step: int = 0
    final_field: LatticeField | None = None
    message: str = ""

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=float)

    @property
    def t_final(self) -> float:
        return self.final_step * self.config.tau

    def first_crossing(self, name: str = "dist", threshold: float = 1.0) -> float | None:
        """First sampled time where ``name`` exceeds ``threshold`` (or the blowup time)."""
        for t, r in zip(self.times, self.reports):
            val = getattr(r, name)
            if not np.isfinite(val) or val > threshold:
                return t
        if self.status == BLOWUP:
            return self.t_final
        return None


def energy_report(f: LatticeField, tau: float, reference: LatticeField | None = None,
                  modified: Callable[[LatticeField], float] | None = None,
                  with_chart: bool = True) -> EnergyReport:
    v, h = f.values, f.grid.h
    ha = _kinetic_energy(v, h)
    hp = _potential_energy(v, h)
    hb = _bracket(v, h, tau)
    hmod = float(modified(f)) if modified is not None else float("nan")
    dist = float("nan")
    chart = None
    if reference is not None:
        dist, _ = orbit_distance(f, reference)
        if with_chart:
            try:
                chart = orbit_coordinates(f, reference)
            except ChartDomainError:
                chart = None
    return EnergyReport(H_h=ha + hp, N_h=_mass(v, h), H_A=ha, H_P=hp, H_bracket=hb,
                        H_modified=hmod, dist=dist, chart=chart,
                        max_abs=float(np.max(np.abs(v))))


def integrate(f0: LatticeField, config: StepperConfig, t_end: float, cadence: int = 1,
              reference: LatticeField | None = None,
              modified: Callable[[LatticeField], float] | None = None,
              hooks: Sequence[Callable[[int, float, LatticeField], None]] = (),
              snapshot_times: Sequence[float] = (), with_chart: bool = True,
              stop_when: Callable[[EnergyReport], bool] | None = None) -> TrajectoryRecord:
    """Advance ``f0`` for ``ceil(t_end / tau)`` steps, sampling every ``cadence`` steps.

    Step 0 is always sampled.  ``hooks`` are called at each sample with
    ``(step, time, field)``; fields are immutable.  A run stops early with
    status ``blowup`` when ``max|psi_j|`` exceeds the threshold or a value is
    non-finite, ``dfp_failure`` when the implicit solve fails, or when
    ``stop_when(report)`` is true.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    grid, tau = f0.grid, config.tau
    nsteps = int(math.ceil(t_end / tau - 1e-9))
    step = make_step(grid, config)
    symmetric = f0.symmetric
    record = TrajectoryRecord(config=config, grid=grid)
    pending = sorted(float(t) for t in snapshot_times)

    def sample(n, v):
        f = LatticeField(grid, v, symmetric=symmetric)
        t = n * tau
        rep = energy_report(f, tau, reference, modified, with_chart)
        record.steps.append(n)
        record.times.append(t)
        record.reports.append(rep)
        for hook in hooks:
            hook(n, t, f)
        return f, rep

    def take_snapshots(n, v):
        t = n * tau
        while pending and t >= pending[0] - 1e-9 * max(1.0, abs(pending[0])):
            record.snapshots[pending.pop(0)] = LatticeField(grid, v, symmetric=symmetric)

    v = f0.values.copy()
    _, rep = sample(0, v)
    take_snapshots(0, v)
    threshold = config.blowup_threshold
    n = 0
    try:
        for n in range(1, nsteps + 1):
            v = step(v)
            if symmetric:
                v = mirror(v)
            vmax = np.max(np.abs(v))
            if not vmax <= threshold:  # catches NaN too
                record.status = BLOWUP
                record.message = f"sup|psi| = {vmax:.3g} at step {n}"
                break
            if pending:
                take_snapshots(n, v)
            if n % cadence == 0 or n == nsteps:
                _, rep = sample(n, v)
                if stop_when is not None and stop_when(rep):
                    record.message = f"stop condition met at t = {n * tau:g}"
                    break
    except DFPFailure as exc:
        record.status = DFP_FAILURE
        record.message = str(exc)
        n -= 1
    record.final_step = n
    diverged = not np.all(np.isfinite(v))
    record.final_field = LatticeField(grid, v, symmetric=symmetric and not diverged,
                                      diverged=diverged)
    if record.status != COMPLETED:
        log.warning("integration stopped: %s (%s)", record.status, record.message)
    return record


def config_dict(config: StepperConfig) -> dict:
    return asdict(config)
