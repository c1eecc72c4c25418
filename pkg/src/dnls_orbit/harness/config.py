"""Run configuration, JSON schema, initial data and the E1/E2/E3 presets."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import jsonschema
import numpy as np

from ..integrators import STEPPER_KINDS, StepperConfig
from ..lattice import GridSpec, LatticeField, mirror, norm_mu, project, sine_transform
from ..soliton import discrete_soliton, eta_sampler

INITIAL_KINDS = ("sampled_soliton", "discrete_soliton", "perturbed")
EXIT_BAD_CONFIG = 64


class ConfigError(ValueError):
    """Invalid run configuration (exit code 64 on the command line)."""


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "K": {"type": "integer", "minimum": 1},
        "kind": {"enum": list(STEPPER_KINDS)},
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "dfp_tol": {"type": "number", "exclusiveMinimum": 0},
        "dfp_maxit": {"type": "integer", "minimum": 1},
        "blowup_threshold": {"type": "number", "exclusiveMinimum": 0},
        "initial": {"enum": list(INITIAL_KINDS)},
        "delta": {"type": "number", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "lowpass_omega": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "cadence": {"type": "integer", "minimum": 1},
        "output_dir": {"type": ["string", "null"]},
        "emit_snapshots": {"type": "boolean"},
        "emit_plots": {"type": "boolean"},
        "snapshot_times": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "modified_energy": {"type": "boolean"},
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one trajectory.

    ``initial`` selects the starting field: the sampled profile, the
    discrete minimizer, or the sampled profile plus ``delta * w`` where ``w``
    is seeded symmetric complex noise with unit mu-norm.  ``lowpass_omega``
    keeps only sine modes with ``omega_k <= lowpass_omega`` in ``w``.
    """

    name: str = "custom"
    h: float = 0.1875
    K: int = 80
    kind: str = "lie_AP"
    tau: float = 0.02
    dfp_tol: float = 1e-13
    dfp_maxit: int = 100
    blowup_threshold: float = 1e3
    initial: str = "sampled_soliton"
    delta: float = 0.0
    seed: int = 0
    lowpass_omega: float | None = None
    t_end: float = 100.0
    cadence: int = 50
    output_dir: str | None = None
    emit_snapshots: bool = True
    emit_plots: bool = False
    snapshot_times: tuple = (0.0, 50.0, 100.0, 200.0)
    modified_energy: bool = True

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))
        try:
            jsonschema.validate(self.to_dict(), CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = ".".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{path}: {exc.message}") from None
        if self.initial != "perturbed" and self.delta != 0:
            raise ConfigError("delta is only meaningful with initial = 'perturbed'")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.h, self.K)

    @property
    def stepper(self) -> StepperConfig:
        return StepperConfig(kind=self.kind, tau=self.tau, dfp_tol=self.dfp_tol,
                             dfp_maxit=self.dfp_maxit, blowup_threshold=self.blowup_threshold)

    @property
    def nsteps(self) -> int:
        return int(np.ceil(self.t_end / self.tau - 1e-9))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snapshot_times"] = list(self.snapshot_times)
        return d

    def updated(self, **overrides) -> "RunConfig":
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(clean) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return replace(self, **clean)


def load_config(path: str | Path, base: RunConfig | None = None) -> RunConfig:
    """Read a JSON config; keys missing from the file keep the values of ``base``."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{path}: {exc.message}") from None
    return (base or RunConfig()).updated(**data)


def save_config(config: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------------------
# presets

E3_FULL_T_END = 1e6

PRESETS = {
    "E1": RunConfig(name="E1", kind="lie_AP", tau=0.2, t_end=300.0, cadence=5,
                    snapshot_times=(0.0, 50.0, 100.0, 200.0)),
    "E2": RunConfig(name="E2", kind="taylor2_then_P", tau=0.001, t_end=200.0, cadence=1000,
                    snapshot_times=(0.0, 50.0, 100.0, 200.0)),
    "E3": RunConfig(name="E3", kind="lie_AP", tau=0.02, t_end=1000.0, cadence=500,
                    snapshot_times=(0.0, 1e2, 1e3, 1e4)),
}


def preset(name: str, full: bool = False, **overrides) -> RunConfig:
    """Preset run; ``full`` extends E3 to ``t = 1e6`` (hours of compute)."""
    key = name.upper()
    if key not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = PRESETS[key]
    if full:
        if key != "E3":
            raise ConfigError("--full only applies to E3")
        cfg = cfg.updated(t_end=E3_FULL_T_END, cadence=50_000)
    return cfg.updated(**overrides)


# ---------------------------------------------------------------------------
# initial data


def perturbation(grid: GridSpec, seed: int, lowpass_omega: float | None = None) -> LatticeField:
    """Symmetric complex noise with unit mu-norm from a seeded generator."""
    rng = np.random.default_rng(seed)
    n = grid.npoints
    w = mirror(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    if lowpass_omega is not None:
        c = sine_transform(w)
        c[grid.frequencies > lowpass_omega] = 0.0
        w = mirror(sine_transform(c))
    f = LatticeField(grid, w, symmetric=True)
    nrm = norm_mu(f)
    if nrm == 0:
        raise ConfigError("low-pass cut-off removes every mode of the perturbation")
    return (1.0 / nrm) * f


def reference_field(grid: GridSpec) -> LatticeField:
    """The sampled profile ``pi_{h,K} eta`` used as orbit reference."""
    return project(eta_sampler(), grid)


def initial_field(config: RunConfig) -> LatticeField:
    grid = config.grid
    if config.initial == "discrete_soliton":
        return discrete_soliton(grid).discrete
    base = reference_field(grid)
    if config.initial == "perturbed" and config.delta > 0:
        return base + config.delta * perturbation(grid, config.seed, config.lowpass_omega)
    return base
