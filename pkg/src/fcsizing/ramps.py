"""Worst-case solar ramp extraction from high-resolution irradiance data.

Pipeline: hourly slicing, ramp detection inside each slice, reduction of
each hour's events to the upper concave envelope of (duration, drop), and
merging of the hourly envelopes into one global worst-case set.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.ndimage import uniform_filter1d

from .domain import InvalidArgument

log = logging.getLogger(__name__)

MAX_RAMP_SAMPLE_PERIOD = 5.0  # s; coarser data misses cloud passages


@dataclass(frozen=True)
class IrradianceSeries:
    start_time: datetime
    dt: float  # s
    values: np.ndarray  # kW/m2

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.dt > 0:
            raise InvalidArgument("sample period must be positive")
        if values.ndim != 1:
            raise InvalidArgument("irradiance values must be one-dimensional")
        if np.any(values < 0):
            raise InvalidArgument("irradiance must be non-negative")

    def __len__(self):
        return len(self.values)

    @property
    def samples_per_hour(self) -> int:
        n = 3600.0 / self.dt
        if abs(n - round(n)) > 1e-9:
            raise InvalidArgument(f"sample period {self.dt} s does not divide one hour")
        return int(round(n))

    def mean(self) -> float:
        return float(self.values.mean()) if len(self.values) else 0.0


@dataclass(frozen=True, order=True)
class RampEvent:
    hour: int
    duration: float  # s
    drop: float  # kW/m2

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidArgument("ramp duration must be positive")
        if self.drop < 0:
            raise InvalidArgument("ramp drop must be non-negative")

    @property
    def rate(self) -> float:
        return self.drop / self.duration


@dataclass(frozen=True)
class RampHull:
    hour: int
    events: tuple[RampEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def points(self) -> np.ndarray:
        return np.array([(e.duration, e.drop) for e in self.events], dtype=float).reshape(-1, 2)


GLOBAL_HOUR = -1


def slice_hours(series: IrradianceSeries) -> list[IrradianceSeries]:
    """Cut a series into whole-hour slices; a trailing partial hour is dropped."""
    n = series.samples_per_hour
    count = len(series) // n
    if count == 0:
        log.info("series shorter than one hour (%d samples), no slices", len(series))
        return []
    dropped = len(series) - count * n
    if dropped:
        log.info("dropping %d trailing samples of a partial hour", dropped)
    return [
        IrradianceSeries(
            start_time=series.start_time + timedelta(hours=k),
            dt=series.dt,
            values=series.values[k * n : (k + 1) * n],
        )
        for k in range(count)
    ]


def detect_ramps(
    slice_: IrradianceSeries,
    min_drop: float = 0.0,
    smooth_window: int = 1,
    hour: int = 0,
    max_duration: Optional[float] = None,
) -> list[RampEvent]:
    """Find strictly decreasing runs of the smoothed signal.

    Each run starts at a local maximum and ends at the following local
    minimum; plateaus split runs. Runs whose drop is below ``min_drop`` (or
    that last longer than ``max_duration`` seconds, when given) are dropped.
    """
    if min_drop < 0:
        raise InvalidArgument("min_drop must be >= 0")
    if smooth_window < 1:
        raise InvalidArgument("smooth_window must be >= 1")
    x = np.asarray(slice_.values, dtype=float)
    if len(x) < 2:
        return []
    if smooth_window > 1:
        x = uniform_filter1d(x, size=smooth_window, mode="nearest")
    falling = np.diff(x) < 0
    # run boundaries of the boolean mask
    edges = np.diff(np.concatenate(([0], falling.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)  # sample index of the local minimum

    events = []
    for i0, i1 in zip(starts, ends):
        duration = (i1 - i0) * slice_.dt
        drop = float(x[i0] - x[i1])
        if drop < min_drop or drop <= 0:
            continue
        if max_duration is not None and duration > max_duration:
            continue
        events.append(RampEvent(hour=hour, duration=float(duration), drop=drop))
    return events


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_reduce(events: Iterable[RampEvent], hour: Optional[int] = None) -> RampHull:
    """Keep only the worst-case events: Pareto front, then its upper concave chain."""
    events = list(events)
    if hour is None:
        hour = events[0].hour if events else GLOBAL_HOUR
    if not events:
        return RampHull(hour=hour)

    # shortest first; for equal durations the largest drop first
    ordered = sorted(events, key=lambda e: (e.duration, -e.drop, e.hour))
    front = []
    best = -np.inf
    for e in ordered:
        if e.drop > best:
            front.append(e)
            best = e.drop

    chain: list[RampEvent] = []
    for e in front:
        p = (e.duration, e.drop)
        while len(chain) >= 2:
            o = (chain[-2].duration, chain[-2].drop)
            a = (chain[-1].duration, chain[-1].drop)
            # drop the middle point unless it turns clockwise (strictly concave)
            if _cross(o, a, p) >= 0:
                chain.pop()
            else:
                break
        chain.append(e)
    return RampHull(hour=hour, events=tuple(chain))


def global_hull(hulls: Sequence[RampHull]) -> RampHull:
    if not hulls:
        return RampHull(hour=GLOBAL_HOUR)
    if len(hulls) == 1:
        return hulls[0]
    return hull_reduce([e for h in hulls for e in h.events], hour=GLOBAL_HOUR)


def pv_power_drop(event: RampEvent, d_pv: float, area: float) -> float:
    """PV power lost (MW) over a ramp for a farm of ``area`` m2."""
    if area < 0:
        raise InvalidArgument("PV area must be >= 0")
    return d_pv * event.drop * area / 1000.0


def hourly_hulls(
    series: IrradianceSeries,
    min_drop: float = 0.0,
    smooth_window: int = 1,
    max_duration: Optional[float] = None,
) -> list[RampHull]:
    if series.dt > MAX_RAMP_SAMPLE_PERIOD:
        log.warning(
            "sample period %.1f s exceeds %.0f s; short ramps will be missed",
            series.dt, MAX_RAMP_SAMPLE_PERIOD,
        )
    hulls = []
    for h, piece in enumerate(slice_hours(series)):
        events = detect_ramps(piece, min_drop, smooth_window, hour=h, max_duration=max_duration)
        hulls.append(hull_reduce(events, hour=h))
    return hulls


def hourly_means(series: IrradianceSeries) -> np.ndarray:
    return np.array([s.mean() for s in slice_hours(series)])


# -- CSV I/O ----------------------------------------------------------------

class CsvFormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def read_timeseries_csv(path) -> tuple[list[datetime], np.ndarray]:
    """Two columns: ISO-8601 timestamp, value. A non-numeric first row is a header."""
    path = Path(path)
    stamps, values = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise CsvFormatError(path, lineno, f"expected 2 columns, got {len(row)}")
            try:
                value = float(row[1])
            except ValueError:
                if lineno == 1:
                    continue
                raise CsvFormatError(path, lineno, f"not a number: {row[1]!r}") from None
            try:
                stamp = datetime.fromisoformat(row[0].strip())
            except ValueError:
                raise CsvFormatError(path, lineno, f"bad timestamp: {row[0]!r}") from None
            stamps.append(stamp)
            values.append(value)
    if not stamps:
        raise CsvFormatError(path, 0, "no data rows")
    return stamps, np.array(values)


def read_irradiance_csv(path) -> IrradianceSeries:
    stamps, values = read_timeseries_csv(path)
    if len(stamps) < 2:
        raise CsvFormatError(path, 2, "need at least two samples to infer the step")
    dt = (stamps[1] - stamps[0]).total_seconds()
    for k in range(2, len(stamps)):
        step = (stamps[k] - stamps[k - 1]).total_seconds()
        if abs(step - dt) > 1e-6:
            # +1 for the 1-based line, +1 for the header row
            raise CsvFormatError(path, k + 2, f"non-uniform step {step} s (expected {dt} s)")
    if np.any(values < 0):
        bad = int(np.flatnonzero(values < 0)[0])
        raise CsvFormatError(path, bad + 2, "negative irradiance")
    return IrradianceSeries(start_time=stamps[0], dt=dt, values=values)


def write_irradiance_csv(path, series: IrradianceSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "irradiance_kW_m2"])
        for k, v in enumerate(series.values):
            t = series.start_time + timedelta(seconds=k * series.dt)
            w.writerow([t.isoformat(), f"{v:.6f}"])


HULL_HEADER = ["hour", "duration_s", "drop_kW_m2"]


def write_hull_csv(path, hulls: Iterable[RampHull]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HULL_HEADER)
        for hull in hulls:
            for e in hull.events:
                w.writerow([e.hour, repr(e.duration), repr(e.drop)])


def read_hull_csv(path) -> dict[int, RampHull]:
    """Hull rows grouped by hour."""
    path = Path(path)
    groups: dict[int, list[RampEvent]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != HULL_HEADER:
            raise CsvFormatError(path, 1, f"expected header {','.join(HULL_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                ev = RampEvent(hour=int(row[0]), duration=float(row[1]), drop=float(row[2]))
            except (ValueError, IndexError) as exc:
                raise CsvFormatError(path, lineno, str(exc)) from None
            groups.setdefault(ev.hour, []).append(ev)
    return {h: RampHull(hour=h, events=tuple(sorted(evs, key=lambda e: e.duration)))
            for h, evs in sorted(groups.items())}
