"""Shared physical and economic types plus the per-unit / reserve algebra."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class InvalidArgument(ValueError):
    pass


class OutOfDomain(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyLimits:
    """Permitted frequency bands, both as fractions of the rated frequency."""

    f_nom: float = 50.0
    r_ss: float = 0.01
    r_tr: float = 0.03
    robust_mode: bool = False

    def __post_init__(self):
        if not self.f_nom > 0:
            raise InvalidArgument(f"f_nom must be positive, got {self.f_nom}")
        # r_ss == 0 is representable so degenerate bands can be evaluated
        if not (0 <= self.r_ss <= self.r_tr < 1):
            raise InvalidArgument(
                f"need 0 <= r_ss <= r_tr < 1, got r_ss={self.r_ss}, r_tr={self.r_tr}"
            )

    def to_hz(self, df_pu):
        return self.f_nom * (1.0 + np.asarray(df_pu))


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    p_max: float
    p_min: float = 0.0
    droop: float = 0.1
    inertia_h: float = 5.51
    rr_frr: float = 0.208
    t_up: int = 1
    t_dn: int = 1
    fuel_a: float = 0.0
    fuel_b: float = 0.0

    def __post_init__(self):
        if not (0 <= self.p_min < self.p_max):
            raise InvalidArgument(f"{self.name}: need 0 <= p_min < p_max")
        if not self.droop > 0:
            raise InvalidArgument(f"{self.name}: droop must be positive")
        if self.rr_frr < 0:
            raise InvalidArgument(f"{self.name}: rr_frr must be >= 0")
        if self.t_up < 1 or self.t_dn < 1:
            raise InvalidArgument(f"{self.name}: minimum up/down times must be >= 1 h")


@dataclass(frozen=True)
class PlantConfig:
    """Generator fleet plus normalisation data.

    ``s_base`` converts per-unit damping times a per-unit frequency band into MW.
    It defaults to ``p_base``; some published reserve figures only reconcile
    with a different base, which is why it is a separate knob.
    """

    generators: tuple[GeneratorSpec, ...]
    p_base: float = 45.0
    d_pv: float = 0.8
    freq: FrequencyLimits = field(default_factory=FrequencyLimits)
    s_base: Optional[float] = None
    pv_inst_max: Optional[float] = None  # MW; None leaves PV capacity unbounded
    per_hour_area: bool = False

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise InvalidArgument("plant needs at least one generator")
        if not self.p_base > 0:
            raise InvalidArgument("p_base must be positive")
        if not (0 < self.d_pv <= 1):
            raise InvalidArgument("d_pv must lie in (0, 1]")
        if self.s_base is None:
            object.__setattr__(self, "s_base", self.p_base)
        elif not self.s_base > 0:
            raise InvalidArgument("s_base must be positive")


@dataclass(frozen=True)
class EconomicParams:
    c_pv: float = 400.0  # $/kW
    c_bat: float = 250.0  # $/kW
    c_fuel: float = 1.01  # $/volume
    c_co2: float = 120.0  # $/t
    co2_factor: float = 1.9e-3  # t/volume
    e: float = 0.03
    y_inst: int = 20

    def __post_init__(self):
        for name in ("c_pv", "c_bat", "c_fuel", "c_co2", "co2_factor"):
            if getattr(self, name) < 0:
                raise InvalidArgument(f"{name} must be >= 0")
        if not (0 <= self.e < 1):
            raise InvalidArgument("discount rate must lie in [0, 1)")
        if self.y_inst < 1:
            raise InvalidArgument("y_inst must be >= 1")

    def annuity(self) -> float:
        """Sum of discount factors for years 0..y_inst inclusive."""
        years = np.arange(self.y_inst + 1)
        return float(np.sum((1.0 + self.e) ** -years))

    @property
    def energy_price(self) -> float:
        """Cost per unit of fuel volume, CO2 penalty included ($/volume)."""
        return self.c_fuel + self.co2_factor * self.c_co2


def to_per_unit(value, base):
    if not base > 0:
        raise InvalidArgument(f"per-unit base must be positive, got {base}")
    return value / base


def from_per_unit(value, base):
    if not base > 0:
        raise InvalidArgument(f"per-unit base must be positive, got {base}")
    return value * base


def damping_of(gen: GeneratorSpec, plant: PlantConfig) -> float:
    """Per-unit controlled damping of a droop governor, P_max / (droop * P_base)."""
    if not gen.droop > 0:
        raise InvalidArgument(f"{gen.name}: zero droop has no finite damping")
    return gen.p_max / (gen.droop * plant.p_base)


def fcr_capacity(gen: GeneratorSpec, plant: PlantConfig) -> float:
    """Largest FCR (MW) a committed unit may be assigned."""
    cap = damping_of(gen, plant) * plant.freq.r_ss * plant.s_base
    if plant.freq.robust_mode:
        cap *= 1.0 - plant.freq.r_tr
    return cap


def fuel_rate(gen: GeneratorSpec, p: float) -> float:
    if p < 0 or p > gen.p_max:
        raise OutOfDomain(f"{gen.name}: output {p} MW outside [0, {gen.p_max}]")
    return gen.fuel_a * p + gen.fuel_b
