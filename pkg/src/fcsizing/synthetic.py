"""Deterministic synthetic irradiance and load data for tests and desk-scale studies.

Irradiance is a clear-sky bell times a cloud attenuation factor built from
linear descents, holds and recoveries. Cloud depths are capped per hour so
that no drop exceeds 60 % of that hour's clear-sky mean, which keeps a fixed
PV area compatible with the PV-disturbance rows in every hour.
"""

from __future__ import annotations

from datetime import datetime
from typing import Sequence

import numpy as np

from .ramps import IrradianceSeries

DEFAULT_START = datetime(2021, 6, 7)
# expected cloud passages per daylight hour, one entry per day of the week
DEFAULT_CLOUDINESS = (0.0, 1.0, 3.0, 6.0, 2.0, 0.5, 4.0)


def clear_sky(t_s: np.ndarray, peak: float = 1.0, sunrise: float = 6.0, sunset: float = 18.0) -> np.ndarray:
    """Clear-sky irradiance (kW/m2) at seconds since local midnight of day 0."""
    hod = (np.asarray(t_s, dtype=float) / 3600.0) % 24.0
    phase = (hod - sunrise) / (sunset - sunrise)
    bell = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    return peak * bell**1.2


def ramp_signal(ramps: Sequence[tuple[float, float]], level: float = 1.0, gap: int = 60, dt: float = 1.0) -> np.ndarray:
    """Flat signal holding ``level`` with one linear descent per (duration_s, drop) pair.

    Each descent is followed by a hold and a linear recovery, so the only
    decreasing runs are the requested ones.
    """
    parts = [np.full(gap, level)]
    for duration, drop in ramps:
        n = int(round(duration / dt))
        if n < 1 or drop > level:
            raise ValueError(f"ramp ({duration}, {drop}) does not fit level {level}")
        parts.append(np.linspace(level, level - drop, n + 1)[1:])
        parts.append(np.full(gap, level - drop))
        parts.append(np.linspace(level - drop, level, n + 1)[1:])
        parts.append(np.full(gap, level))
    return np.concatenate(parts)


def synthetic_irradiance(
    days: int = 7,
    dt: float = 1.0,
    seed: int = 20210607,
    cloudiness: Sequence[float] = DEFAULT_CLOUDINESS,
    start: datetime = DEFAULT_START,
) -> IrradianceSeries:
    rng = np.random.default_rng(seed)
    n = int(round(days * 86400 / dt))
    t = np.arange(n) * dt
    cs = clear_sky(t)
    factor = np.ones(n)
    spp = int(round(3600 / dt))
    for h in range(days * 24):
        lo, hi = h * spp, (h + 1) * spp
        hour_mean = cs[lo:hi].mean()
        if hour_mean < 0.02:
            continue
        rate = cloudiness[(h // 24) % len(cloudiness)]
        for _ in range(rng.poisson(rate)):
            down = rng.uniform(2, 60)
            hold = rng.uniform(10, 120)
            up = rng.uniform(5, 90)
            total = down + hold + up
            t0 = rng.uniform(0, 3600 - total)
            i0 = lo + int(t0 / dt)
            # cap the absolute drop at 0.6 of the hourly clear-sky mean
            depth = min(rng.uniform(0.1, 0.9), 0.6 * hour_mean / max(cs[i0:hi].max(), 1e-9))
            nd, nh, nu = (max(1, int(round(x / dt))) for x in (down, hold, up))
            shape = np.concatenate([
                np.linspace(1.0, 1.0 - depth, nd + 1)[1:],
                np.full(nh, 1.0 - depth),
                np.linspace(1.0 - depth, 1.0, nu + 1)[1:],
            ])
            seg = slice(i0, min(i0 + len(shape), hi))
            factor[seg] = np.minimum(factor[seg], shape[: seg.stop - seg.start])
    return IrradianceSeries(start, dt, np.round(cs * factor, 6))


def synthetic_load(hours: int = 168, seed: int = 7, low: float = 115.0, high: float = 140.0) -> np.ndarray:
    """Hourly load (MW) with a daily cycle peaking in the evening, kept within [low, high]."""
    rng = np.random.default_rng(seed)
    h = np.arange(hours)
    mid, amp = (low + high) / 2, (high - low) / 2
    daily = np.sin(2 * np.pi * (h % 24 - 13) / 24)
    noise = rng.normal(0.0, 0.15, hours)
    return np.round(np.clip(mid + amp * (0.8 * daily + noise), low, high), 3)
