"""Experiment configuration: one YAML file per experiment.

The file is the experiment's archival record: it names a registry model
family with parameters (and optional assumption-constant overrides), the
integrator policy, the sampling budget, the mass grid, and the Stein-check
settings, plus a single master seed.  Command-line flags may override only
the seed and the output directory, so a config file plus a seed pins every
byte of CSV output.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .exceptions import ConfigError
from .integrate import IntegratorConfig, SCHEMES
from .models import MODEL_FAMILIES, TEST_FUNCTIONS, ModelSpec, make_model
from .ratelab import SweepPlan

_CONSTANT_FIELDS = (
    "lipschitz_L",
    "growth_Lb",
    "ellipticity_sigma0",
    "dissipative_c1",
    "dissipative_c2",
    "sigma_sup",
)


@dataclass
class ModelSection:
    family: str = "reference1d"
    params: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)  # overrides of declared constants


@dataclass
class IntegratorSection:
    scheme: str = "kinetic_exponential"
    dt_max: float = 1e-2
    mass_cfl: float = 0.2


@dataclass
class SamplingSection:
    n_samples: int = 100_000
    n_chains: int = 256
    burn_in: Optional[float] = None  # default: dissipativity-scaled
    thinning: Optional[float] = None


@dataclass
class SweepSection:
    m_grid: list = field(default_factory=lambda: [2.0**-k for k in range(4, 10)])
    transport_method: str = "auto"
    n_proj: int = 128
    lp_subsample: int = 2048
    lp_crosscheck: bool = True
    with_log_correction: bool = False
    limit_dt_max: Optional[float] = None


@dataclass
class SteinSection:
    h: str = "identity"
    radius: Optional[float] = None  # default: model-derived
    n_grid: int = 2**18 + 1
    m: float = 2.0**-6
    n_samples: int = 200_000


@dataclass
class SimulateSection:
    kind: str = "kinetic"  # kinetic | limit
    m: float = 0.25
    horizon: float = 10.0
    record_stride: int = 1
    x0: Optional[list] = None
    y0: Optional[list] = None


@dataclass
class ExperimentConfig:
    model: ModelSection = field(default_factory=ModelSection)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    stein: SteinSection = field(default_factory=SteinSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    master_seed: int = 0
    output_dir: str = "smallmass_out"


_SECTIONS = {
    "model": ModelSection,
    "integrator": IntegratorSection,
    "sampling": SamplingSection,
    "sweep": SweepSection,
    "stein": SteinSection,
    "simulate": SimulateSection,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping")
    cfg = ExperimentConfig()
    known = set(_SECTIONS) | {"master_seed", "output_dir"}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown top-level key {key!r}; known: {sorted(known)}")
    for name, cls in _SECTIONS.items():
        sub = data.get(name, {})
        if sub is None:
            sub = {}
        if not isinstance(sub, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        fields = {f.name for f in dataclasses.fields(cls)}
        for key in sub:
            if key not in fields:
                raise ConfigError(f"unknown key {name}.{key!r}; known: {sorted(fields)}")
        setattr(cfg, name, cls(**sub))
    if "master_seed" in data:
        cfg.master_seed = int(data["master_seed"])
    if "output_dir" in data:
        cfg.output_dir = str(data["output_dir"])
    _validate(cfg)
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        out[name] = dataclasses.asdict(getattr(cfg, name))
    out["master_seed"] = cfg.master_seed
    out["output_dir"] = cfg.output_dir
    return out


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.model.family not in MODEL_FAMILIES:
        raise ConfigError(
            f"model.family {cfg.model.family!r} not in registry {sorted(MODEL_FAMILIES)}"
        )
    for key in cfg.model.constants:
        if key not in _CONSTANT_FIELDS:
            raise ConfigError(f"model.constants.{key!r} is not an assumption constant")
    if cfg.integrator.scheme not in SCHEMES:
        raise ConfigError(f"integrator.scheme must be one of {SCHEMES}")
    if cfg.integrator.dt_max <= 0:
        raise ConfigError("integrator.dt_max must be positive")
    if not (0 < cfg.integrator.mass_cfl <= 1):
        raise ConfigError("integrator.mass_cfl must lie in (0, 1]")
    if cfg.sampling.n_samples < 1 or cfg.sampling.n_chains < 1:
        raise ConfigError("sampling.n_samples and sampling.n_chains must be >= 1")
    if not cfg.sweep.m_grid:
        raise ConfigError("sweep.m_grid must be nonempty")
    if any(m <= 0 for m in cfg.sweep.m_grid):
        raise ConfigError("sweep.m_grid entries must be positive")
    if cfg.stein.h not in TEST_FUNCTIONS:
        raise ConfigError(f"stein.h {cfg.stein.h!r} not in {sorted(TEST_FUNCTIONS)}")
    if cfg.simulate.kind not in ("kinetic", "limit"):
        raise ConfigError("simulate.kind must be 'kinetic' or 'limit'")
    # constants overrides must construct a coherent model
    try:
        build_model(cfg)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"model section rejected: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError(f"YAML parse error in {path}{where}: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=True))


def build_model(cfg: ExperimentConfig) -> ModelSpec:
    try:
        spec = make_model(cfg.model.family, **cfg.model.params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for family {cfg.model.family!r}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.model.constants:
        try:
            spec = dataclasses.replace(spec, **cfg.model.constants)
        except ValueError as exc:
            raise ConfigError(f"constants override rejected: {exc}") from exc
    return spec


def build_integrator(cfg: ExperimentConfig) -> IntegratorConfig:
    return IntegratorConfig(
        scheme=cfg.integrator.scheme,
        dt_max=cfg.integrator.dt_max,
        mass_cfl=cfg.integrator.mass_cfl,
        rng_seed=cfg.master_seed,
    )


def build_sweep_plan(cfg: ExperimentConfig) -> SweepPlan:
    return SweepPlan(
        n_samples=cfg.sampling.n_samples,
        n_chains=cfg.sampling.n_chains,
        burn_in=cfg.sampling.burn_in,
        thinning=cfg.sampling.thinning,
        limit_dt_max=cfg.sweep.limit_dt_max,
        transport_method=cfg.sweep.transport_method,
        n_proj=cfg.sweep.n_proj,
        lp_subsample=cfg.sweep.lp_subsample,
        lp_crosscheck=cfg.sweep.lp_crosscheck,
    )
