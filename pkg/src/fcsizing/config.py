"""YAML study configuration: plant, economics, ramp extraction, simulation and solver settings."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from .domain import EconomicParams, FrequencyLimits, GeneratorSpec, PlantConfig

DEFAULT_CONFIG_NAME = "og_installation_160mw.yaml"


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class RampParams:
    min_drop: float = 0.02  # kW/m2
    smooth_window: int = 1  # samples
    max_duration: Optional[float] = 600.0  # s


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.01
    t_end: float = 120.0
    governor_mode: str = "combined"
    battery_droop: Optional[float] = None  # None: r_ss
    frr_gain: float = 10.0
    transient_window: float = 5.0
    post_trip_inertia: bool = False
    # load_step: the trip is a load step and every committed unit stays online,
    # as the reserve rows assume; unit_loss: the largest unit leaves the grid
    trip_model: str = "load_step"

    def __post_init__(self):
        if self.trip_model not in ("load_step", "unit_loss"):
            raise ValueError(f"trip_model must be load_step or unit_loss, got {self.trip_model!r}")


@dataclass(frozen=True)
class SolverParams:
    gap: float = 0.01
    max_nodes: Optional[int] = None
    time_limit: Optional[float] = None
    lp_solver: str = "simplex"


@dataclass(frozen=True)
class StudyConfig:
    case: str
    plant: PlantConfig
    econ: EconomicParams
    ramps: RampParams = field(default_factory=RampParams)
    sim: SimParams = field(default_factory=SimParams)
    solver: SolverParams = field(default_factory=SolverParams)

    def with_robust(self, robust: bool) -> "StudyConfig":
        freq = replace(self.plant.freq, robust_mode=robust)
        return replace(self, plant=replace(self.plant, freq=freq))


def _build(cls, data: dict, path, section):
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(path, f"unknown key(s) in {section}: {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, f"{section}: {exc}") from None


def parse_config(data: dict[str, Any], path="<config>") -> StudyConfig:
    if not isinstance(data, dict):
        raise ConfigError(path, "top level must be a mapping")
    data = dict(data)
    gens_raw = data.pop("generators", None)
    if not gens_raw:
        raise ConfigError(path, "at least one generator is required")
    plant_raw = dict(data.pop("plant", {}) or {})
    scale = float(plant_raw.pop("fuel_a_scale", 1.0))
    gens = []
    for k, g in enumerate(gens_raw):
        g = dict(g)
        count = int(g.pop("count", 1))
        base = g.pop("name", f"GT{k + 1}")
        if "fuel_a" in g:
            g["fuel_a"] = float(g["fuel_a"]) * scale
        for c in range(count):
            name = base if count == 1 else f"{base}{c + 1}"
            gens.append(_build(GeneratorSpec, {"name": name, **g}, path, f"generators[{k}]"))
    freq = _build(FrequencyLimits, dict(data.pop("frequency", {}) or {}), path, "frequency")
    plant = _build(PlantConfig, {"generators": tuple(gens), "freq": freq, **plant_raw}, path, "plant")
    econ = _build(EconomicParams, dict(data.pop("economics", {}) or {}), path, "economics")
    ramps = _build(RampParams, dict(data.pop("ramps", {}) or {}), path, "ramps")
    sim = _build(SimParams, dict(data.pop("simulation", {}) or {}), path, "simulation")
    solver = _build(SolverParams, dict(data.pop("solver", {}) or {}), path, "solver")
    case = str(data.pop("case", "study"))
    if data:
        raise ConfigError(path, f"unknown top-level key(s): {sorted(data)}")
    return StudyConfig(case, plant, econ, ramps, sim, solver)


def load_config(path: Optional[str | Path] = None) -> StudyConfig:
    """Load a YAML config; ``None`` gives the bundled case-study defaults."""
    if path is None:
        text = resources.files("fcsizing.data").joinpath(DEFAULT_CONFIG_NAME).read_text()
        path = DEFAULT_CONFIG_NAME
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(path, f"cannot read: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError(path, f"{where}invalid YAML") from None
    return parse_config(data, path)
