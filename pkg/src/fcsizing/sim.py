"""Time-domain frequency response of an islanded grid to trips and PV ramps.

The normalized swing equation ``(1 + df) M d(df)/dt = p_g - p_l - D df`` is
integrated with fixed-step RK4. Powers are deviations from a balanced
operating point, in per-unit of ``s_base``; ``df`` is per-unit of ``f_nom``.

Each committed unit answers with an instantaneous droop share (FCR, capped)
and a slow share (FRR) whose rate is limited to ``rr_frr``. The battery is a
saturated droop.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .domain import FrequencyLimits, GeneratorSpec, InvalidArgument

GOVERNOR_MODES = ("combined", "fcr_only", "frr_only")
ABORT_DEVIATION = 0.5  # p.u.


@dataclass(frozen=True)
class LoadStep:
    t: float
    magnitude: float  # MW of lost generation or added load

    @property
    def start(self) -> float:
        return self.t

    @property
    def end(self) -> float:
        return self.t

    def power(self, t: float) -> float:
        return self.magnitude if t >= self.t else 0.0


@dataclass(frozen=True)
class PowerRamp:
    t0: float
    duration: float
    total_drop: float  # MW

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidArgument(f"ramp duration must be positive, got {self.duration}")

    @property
    def start(self) -> float:
        return self.t0

    @property
    def end(self) -> float:
        return self.t0 + self.duration

    def power(self, t: float) -> float:
        frac = min(max((t - self.t0) / self.duration, 0.0), 1.0)
        return self.total_drop * frac


DisturbanceEvent = Union[LoadStep, PowerRamp]


@dataclass(frozen=True)
class CommittedUnit:
    spec: GeneratorSpec
    p0: float  # MW operating point before the disturbance

    def __post_init__(self):
        if not (self.spec.p_min - 1e-9 <= self.p0 <= self.spec.p_max + 1e-9):
            raise InvalidArgument(f"{self.spec.name}: operating point {self.p0} MW outside unit limits")


@dataclass(frozen=True)
class SimConfig:
    """One scripted contingency.

    ``inertia_units`` counts how many of the committed units (in order)
    contribute to M; ``None`` uses all of them. ``fcr_limit`` overrides the
    FCR cap in MW, either one value for every unit or one per unit
    (``math.inf`` disables it). ``battery_droop`` is
    the per-unit frequency deviation at which the battery delivers full
    power; ``None`` means ``freq.r_ss``. ``frr_gain`` sets how quickly the
    FRR rate saturates: full ramp rate at ``|df| = r_ss / frr_gain``.
    """

    committed: tuple[CommittedUnit, ...]
    events: tuple[DisturbanceEvent, ...] = ()
    freq: FrequencyLimits = field(default_factory=FrequencyLimits)
    p_base: float = 45.0
    s_base: float = 45.0
    inertia_units: Optional[int] = None
    battery_power: float = 0.0
    battery_droop: Optional[float] = None
    load_damping: float = 0.0
    dt: float = 0.01
    t_end: float = 120.0
    governor_mode: str = "combined"
    frr_gain: float = 10.0
    fcr_limit: Union[None, float, tuple[float, ...]] = None
    ramp_limits: bool = True
    post_trip_inertia: bool = False

    def __post_init__(self):
        object.__setattr__(self, "committed", tuple(self.committed))
        object.__setattr__(self, "events", tuple(self.events))
        if not self.committed:
            raise InvalidArgument("at least one committed unit is required")
        if not self.dt > 0:
            raise InvalidArgument("dt must be positive")
        starts = [e.start for e in self.events]
        if starts != sorted(starts):
            raise InvalidArgument("events must be sorted by start time")
        if self.events and not self.t_end > max(e.end for e in self.events):
            raise InvalidArgument("t_end must lie after the last event")
        if self.governor_mode not in GOVERNOR_MODES:
            raise InvalidArgument(f"governor_mode must be one of {GOVERNOR_MODES}")
        if not self.freq.r_ss > 0:
            raise InvalidArgument("simulation needs a positive steady-state band r_ss")
        if self.battery_power < 0 or self.load_damping < 0:
            raise InvalidArgument("battery_power and load_damping must be >= 0")
        if self.inertia_units is not None and not 1 <= self.inertia_units <= len(self.committed):
            raise InvalidArgument("inertia_units must be between 1 and the number of committed units")
        if self.fcr_limit is not None and not isinstance(self.fcr_limit, (int, float)):
            object.__setattr__(self, "fcr_limit", tuple(float(c) for c in self.fcr_limit))
            if len(self.fcr_limit) != len(self.committed):
                raise InvalidArgument("fcr_limit needs one entry per committed unit")
        if self.battery_droop is not None and not self.battery_droop > 0:
            raise InvalidArgument("battery_droop must be positive")

    @property
    def inertia(self) -> float:
        """M in seconds on the ``s_base`` base."""
        k = self.inertia_units or len(self.committed)
        return sum(2.0 * u.spec.inertia_h * u.spec.p_max / self.s_base for u in self.committed[:k])

    def damping(self) -> np.ndarray:
        """Per-unit controlled damping of each committed unit."""
        return np.array([u.spec.p_max / (u.spec.droop * self.p_base) for u in self.committed])

    def fcr_caps(self) -> np.ndarray:
        if self.fcr_limit is not None:
            return np.broadcast_to(np.asarray(self.fcr_limit, dtype=float), (len(self.committed),)).copy()
        cap = self.damping() * self.freq.r_ss * self.s_base
        if self.freq.robust_mode:
            cap = cap * (1.0 - self.freq.r_tr)
        return cap


@dataclass
class FrequencyTrace:
    t: np.ndarray
    df_pu: np.ndarray
    gen_power: np.ndarray  # (len(t), units) MW
    battery_power: np.ndarray  # MW, positive = discharge
    imbalance: np.ndarray  # p_g - p_l - D df, MW
    f_nom: float
    unit_names: tuple[str, ...]
    last_event_end: float = 0.0

    @property
    def df_hz(self) -> np.ndarray:
        return self.df_pu * self.f_nom

    @property
    def f_hz(self) -> np.ndarray:
        return self.f_nom * (1.0 + self.df_pu)

    @property
    def nadir_hz(self) -> float:
        return float(self.f_hz.min())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_s", "f_hz", "df_hz"] + [f"{n}_mw" for n in self.unit_names] + ["battery_mw", "imbalance_mw"])
        for k in range(len(self.t)):
            w.writerow(
                [f"{self.t[k]:.6f}", f"{self.f_hz[k]:.9f}", f"{self.df_hz[k]:.9f}"]
                + [f"{p:.9f}" for p in self.gen_power[k]]
                + [f"{self.battery_power[k]:.9f}", f"{self.imbalance[k]:.9f}"]
            )
        return buf.getvalue()


class SimulationAborted(RuntimeError):
    def __init__(self, message: str, trace: FrequencyTrace):
        super().__init__(message)
        self.trace = trace


def _time_grid(cfg: SimConfig) -> np.ndarray:
    n = int(math.floor(cfg.t_end / cfg.dt + 1e-9))
    grid = np.arange(n + 1) * cfg.dt
    marks = [x for e in cfg.events for x in (e.start, e.end) if 0 < x < cfg.t_end]
    grid = np.union1d(grid, np.array(marks + [cfg.t_end]))
    # drop sliver steps created by breakpoints next to grid points
    keep = np.concatenate([[True], np.diff(grid) > 1e-9 * cfg.dt])
    return grid[keep]


def simulate(cfg: SimConfig) -> FrequencyTrace:
    """Integrate the swing equation over ``[0, t_end]``.

    Raises :class:`SimulationAborted` (carrying the partial trace) once
    ``|df|`` exceeds 0.5 p.u.
    """
    units = cfg.committed
    G = len(units)
    sb = cfg.s_base
    D = [float(x) for x in cfg.damping()]
    caps = [float(x) for x in cfg.fcr_caps()]
    p0 = [u.p0 for u in units]
    pmin = [u.spec.p_min for u in units]
    pmax = [u.spec.p_max for u in units]
    rr = [u.spec.rr_frr for u in units]
    p0_sum = sum(p0)
    use_fcr = cfg.governor_mode in ("combined", "fcr_only")
    use_frr = cfg.governor_mode in ("combined", "frr_only")
    bat_cap = cfg.battery_power
    bat_slope = bat_cap / (cfg.battery_droop if cfg.battery_droop is not None else cfg.freq.r_ss)
    frr_scale = cfg.frr_gain / cfg.freq.r_ss
    limits_on = cfg.ramp_limits
    load_d = cfg.load_damping
    steps = [e for e in cfg.events if isinstance(e, LoadStep)]
    ramps = [e for e in cfg.events if isinstance(e, PowerRamp)]

    M_full = cfg.inertia
    trip_t = steps[0].t if steps else None
    lost_m = 0.0
    if cfg.post_trip_inertia and trip_t is not None:
        lost_m = max(2.0 * u.spec.inertia_h * u.spec.p_max / sb for u in units)

    def fcr_of(df, i):
        if not use_fcr:
            return 0.0
        d = -D[i] * sb * df
        return min(max(d, -caps[i]), caps[i])

    def outputs(df, z):
        pg = []
        for i in range(G):
            p = p0[i] + fcr_of(df, i) + (z[i] if use_frr else 0.0)
            if limits_on:
                p = min(max(p, pmin[i]), pmax[i])
            pg.append(p)
        bat = min(max(-df * bat_slope, -bat_cap), bat_cap) if bat_cap > 0 else 0.0
        return pg, bat

    def rhs(t, df, z, M, step_load):
        pg, bat = outputs(df, z)
        p_l = step_load
        for e in ramps:
            if t > e.t0:
                p_l += e.total_drop * min((t - e.t0) / e.duration, 1.0)
        imb = (sum(pg) - p0_sum + bat - p_l) / sb - load_d * df
        ddf = imb / ((1.0 + df) * M)
        dz = [0.0] * G
        if use_frr:
            for i in range(G):
                rate = -df * frr_scale * rr[i]
                if limits_on:
                    rate = min(max(rate, -rr[i]), rr[i])
                    raw = p0[i] + fcr_of(df, i) + z[i]
                    if (raw >= pmax[i] and rate > 0) or (raw <= pmin[i] and rate < 0):
                        rate = 0.0  # anti-windup at the unit limits
                dz[i] = rate
        return ddf, dz, imb * sb

    def axpy(z, h, dz):
        return [zi + h * di for zi, di in zip(z, dz)]

    grid = _time_grid(cfg)
    n = len(grid)
    df_tr = np.zeros(n)
    gen_tr = np.zeros((n, G))
    bat_tr = np.zeros(n)
    imb_tr = np.zeros(n)
    last_end = max((e.end for e in cfg.events), default=0.0)

    df, z = 0.0, [0.0] * G
    gen_tr[0], bat_tr[0] = outputs(df, z)

    def trace(upto):
        return FrequencyTrace(grid[:upto], df_tr[:upto], gen_tr[:upto], bat_tr[:upto], imb_tr[:upto],
                              cfg.freq.f_nom, tuple(u.spec.name for u in units), last_end)

    def state_at(a):
        # steps are active on intervals starting at or after their time
        load = sum(e.magnitude for e in steps if a >= e.t - 1e-12)
        tripped = trip_t is not None and a >= trip_t - 1e-12
        return load, M_full - (lost_m if tripped else 0.0)

    for k in range(n - 1):
        a, b = float(grid[k]), float(grid[k + 1])
        h = b - a
        load, M = state_at(a)
        k1, l1, i1 = rhs(a, df, z, M, load)
        k2, l2, _ = rhs(a + h / 2, df + h / 2 * k1, axpy(z, h / 2, l1), M, load)
        k3, l3, _ = rhs(a + h / 2, df + h / 2 * k2, axpy(z, h / 2, l2), M, load)
        k4, l4, _ = rhs(b, df + h * k3, axpy(z, h, l3), M, load)
        imb_tr[k] = i1
        df = df + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        z = [zi + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4) for zi, a1, a2, a3, a4 in zip(z, l1, l2, l3, l4)]
        df_tr[k + 1] = df
        gen_tr[k + 1], bat_tr[k + 1] = outputs(df, z)
        if not math.isfinite(df) or abs(df) > ABORT_DEVIATION:
            raise SimulationAborted(
                f"frequency deviation {df:.3g} p.u. at t = {b:.3f} s exceeds {ABORT_DEVIATION} p.u.; "
                "the disturbance is not survivable with the given reserves",
                trace(k + 2),
            )
    load, M = state_at(float(grid[-1]))
    imb_tr[-1] = rhs(float(grid[-1]), df, z, M, load)[2]
    return trace(n)


@dataclass(frozen=True)
class LimitVerdict:
    passed: bool
    nadir_hz: float
    max_deviation_pu: float
    settling_time: Optional[float]  # s after the transient window; None if never settles
    reason: str = ""

    def to_dict(self) -> dict:
        return dict(passed=self.passed, nadir_hz=self.nadir_hz, max_deviation_pu=self.max_deviation_pu,
                    settling_time=self.settling_time, reason=self.reason)


def verify_limits(trace: FrequencyTrace, limits: FrequencyLimits, transient_window: float = 5.0,
                  tol: float = 1e-9) -> LimitVerdict:
    """Check the transient band everywhere and the steady-state band once the events are over.

    The steady-state band applies from ``last_event_end + transient_window``.
    ``settling_time`` counts from the end of the last event to the last
    sample outside the steady-state band.
    """
    if len(trace.t) == 0:
        raise InvalidArgument("empty trace")
    dev = np.abs(trace.df_pu)
    max_dev = float(dev.max())
    nadir = float(trace.f_hz.min())
    outside = np.flatnonzero(dev > limits.r_ss + tol)
    if outside.size == 0:
        settling: Optional[float] = 0.0
    elif outside[-1] == len(dev) - 1:
        settling = None
    else:
        settling = max(0.0, float(trace.t[outside[-1] + 1] - trace.last_event_end))
    reasons = []
    if max_dev > limits.r_tr + tol:
        reasons.append(f"transient deviation {max_dev:.4g} p.u. exceeds r_tr = {limits.r_tr}")
    late = trace.t >= trace.last_event_end + transient_window
    if np.any(dev[late] > limits.r_ss + tol):
        worst = float(dev[late].max())
        reasons.append(f"post-event deviation {worst:.4g} p.u. exceeds r_ss = {limits.r_ss}")
    return LimitVerdict(not reasons, nadir, max_dev, settling, "; ".join(reasons))


def min_damping(p_b: float, limits: FrequencyLimits, s_base: float) -> float:
    """Smallest per-unit controlled damping that holds a ``p_b`` MW loss inside r_ss."""
    if p_b < 0:
        raise InvalidArgument("p_b must be >= 0")
    if not s_base > 0:
        raise InvalidArgument("s_base must be positive")
    if limits.r_ss == 0:
        raise InvalidArgument("r_ss = 0 admits no finite damping")
    d = p_b / (limits.r_ss * s_base)
    if limits.robust_mode:
        d /= 1.0 - limits.r_tr
    return d


def read_trace_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def events_from(dicts: Sequence[dict]) -> tuple[DisturbanceEvent, ...]:
    out = []
    for d in dicts:
        if d.get("kind") == "step":
            out.append(LoadStep(float(d["t"]), float(d["magnitude"])))
        elif d.get("kind") == "ramp":
            out.append(PowerRamp(float(d["t0"]), float(d["duration"]), float(d["total_drop"])))
        else:
            raise InvalidArgument(f"unknown event kind {d.get('kind')!r}")
    return tuple(sorted(out, key=lambda e: e.start))
