import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcsizing.domain import FrequencyLimits, GeneratorSpec, InvalidArgument
from fcsizing.sim import (
    CommittedUnit,
    FrequencyTrace,
    LoadStep,
    PowerRamp,
    SimConfig,
    SimulationAborted,
    events_from,
    min_damping,
    read_trace_csv,
    simulate,
    verify_limits,
)

from helpers import worst_case_sim

FREQ = FrequencyLimits(50.0, 0.01, 0.03)


def units(n=3, p0=30.0, **kw):
    spec = dict(p_max=45.0, p_min=0.0, droop=0.1, inertia_h=5.51, rr_frr=0.208, **kw)
    return tuple(CommittedUnit(GeneratorSpec(f"GT{i + 1}", **spec), p0) for i in range(n))


def flat_trace(n=50, level=0.0, last=0.0):
    t = np.linspace(0, 10, n)
    return FrequencyTrace(t, np.full(n, level), np.zeros((n, 1)), np.zeros(n), np.zeros(n), 50.0, ("G",), last)


def test_no_events_stays_balanced():
    tr = simulate(SimConfig(units(), t_end=5.0))
    assert np.all(tr.df_pu == 0.0)
    assert tr.nadir_hz == 50.0
    assert tr.gen_power.shape == (len(tr.t), 3) and len(tr.battery_power) == len(tr.t)


@given(st.floats(1.0, 40.0), st.integers(1, 4), st.floats(0.0, 2.0))
def test_droop_law(p_b, n, load_damping):
    cfg = SimConfig(units(n, p0=20.0), (LoadStep(1.0, p_b),), FREQ, s_base=45.0, t_end=60.0, dt=0.02,
                    governor_mode="fcr_only", fcr_limit=math.inf, ramp_limits=False, load_damping=load_damping)
    tr = simulate(cfg)
    total = float(cfg.damping().sum()) + load_damping
    assert abs(tr.df_pu[-1] + p_b / (total * cfg.s_base)) < 1e-4


def test_worst_case_nadir():
    cfg = worst_case_sim()
    tr = simulate(cfg)
    v = verify_limits(tr, cfg.freq)
    assert v.passed, v.reason
    assert tr.nadir_hz == pytest.approx(49.5, abs=0.05)
    assert tr.df_pu[0] == 0.0


def test_without_fcr_or_battery_the_limits_break():
    cfg = worst_case_sim(battery=0.0, fcr_total=0.0)
    try:
        tr = simulate(cfg)
    except SimulationAborted as exc:
        tr = exc.trace
    assert not verify_limits(tr, cfg.freq).passed


def test_halving_dt_moves_nadir_little():
    a = simulate(worst_case_sim(dt=0.01, t_end=60.0)).nadir_hz
    b = simulate(worst_case_sim(dt=0.005, t_end=60.0)).nadir_hz
    assert abs(a - b) < 1e-3


def test_energy_bookkeeping():
    cfg = worst_case_sim(t_end=60.0, load_damping=0.5)
    tr = simulate(cfg)
    M = cfg.inertia
    left, right = tr.imbalance[:-1], tr.imbalance[1:].copy()
    # the sample at the step time already carries the step; the interval before it does not
    at_step = np.isclose(tr.t[1:], 10.0)
    right[at_step] = left[at_step]
    integral = np.concatenate([[0.0], np.cumsum((left + right) / 2 * np.diff(tr.t))]) / cfg.s_base
    kinetic = M * ((1.0 + tr.df_pu) ** 2 - 1.0) / 2.0
    assert np.max(np.abs(integral - kinetic)) < 1e-4 * np.max(np.abs(kinetic))


def test_battery_saturates():
    tr = simulate(worst_case_sim(battery=5.0))
    assert tr.battery_power.max() <= 5.0 + 1e-12
    assert tr.battery_power.max() == pytest.approx(5.0)


def test_frr_rate_limit():
    cfg = worst_case_sim(governor_mode="frr_only", battery=40.0)
    tr = simulate(cfg)
    slope = np.diff(tr.gen_power, axis=0) / np.diff(tr.t)[:, None]
    assert slope.max() <= 0.208 + 1e-9


def test_unit_limits_respected():
    cfg = SimConfig(units(2, p0=44.0), (LoadStep(1.0, 5.0),), FREQ, battery_power=10.0, t_end=30.0)
    tr = simulate(cfg)
    assert tr.gen_power.max() <= 45.0 + 1e-12


def test_post_trip_inertia_deepens_nadir():
    a = simulate(worst_case_sim(t_end=60.0)).nadir_hz
    b = simulate(worst_case_sim(t_end=60.0, post_trip_inertia=True)).nadir_hz
    assert b <= a


def test_inertia_definition():
    cfg = SimConfig(units(4), s_base=45.0, inertia_units=3, t_end=1.0)
    assert cfg.inertia == pytest.approx(3 * 2 * 5.51)


def test_abort_carries_trace():
    cfg = SimConfig(units(1, p0=40.0), (LoadStep(1.0, 40.0),), FREQ, t_end=200.0, governor_mode="frr_only")
    with pytest.raises(SimulationAborted) as info:
        simulate(cfg)
    tr = info.value.trace
    assert abs(tr.df_pu[-1]) > 0.5 and len(tr.t) == len(tr.df_pu)


def test_trace_csv():
    tr = simulate(worst_case_sim(t_end=40.0))
    rows = read_trace_csv(tr.to_csv())
    assert len(rows) == len(tr.t)
    assert list(rows[0]) == ["t_s", "f_hz", "df_hz", "GT1_mw", "GT2_mw", "GT3_mw", "battery_mw", "imbalance_mw"]
    assert float(rows[-1]["f_hz"]) == pytest.approx(tr.f_hz[-1], abs=1e-8)


@pytest.mark.parametrize("kw", [
    dict(committed=()),
    dict(dt=0.0),
    dict(events=(LoadStep(5.0, 1.0), LoadStep(1.0, 1.0))),
    dict(events=(LoadStep(5.0, 1.0),), t_end=4.0),
    dict(governor_mode="magic"),
    dict(battery_power=-1.0),
    dict(inertia_units=0),
    dict(fcr_limit=(1.0, 2.0)),
    dict(battery_droop=0.0),
])
def test_config_validation(kw):
    base = dict(committed=units(), t_end=10.0)
    base.update(kw)
    with pytest.raises(InvalidArgument):
        SimConfig(**base)


def test_event_helpers():
    with pytest.raises(InvalidArgument):
        PowerRamp(0.0, 0.0, 1.0)
    r = PowerRamp(10.0, 20.0, 4.0)
    assert (r.start, r.end, r.power(20.0), r.power(40.0)) == (10.0, 30.0, 2.0, 4.0)
    s = LoadStep(3.0, 2.0)
    assert (s.power(2.9), s.power(3.0)) == (0.0, 2.0)
    evs = events_from([{"kind": "ramp", "t0": 5, "duration": 2, "total_drop": 1},
                       {"kind": "step", "t": 1, "magnitude": 3}])
    assert isinstance(evs[0], LoadStep)
    with pytest.raises(InvalidArgument):
        events_from([{"kind": "wave"}])


# -- verdicts --------------------------------------------------------------

def test_flat_trace_passes():
    v = verify_limits(flat_trace(), FREQ)
    assert v.passed and v.nadir_hz == 50.0 and v.settling_time == 0.0


def test_deep_dip_fails():
    tr = flat_trace()
    tr.df_pu[10] = -0.04  # 48.0 Hz against a 48.5 Hz floor
    v = verify_limits(tr, FrequencyLimits(50.0, 0.01, 0.03))
    assert not v.passed and v.nadir_hz == pytest.approx(48.0)
    assert "transient" in v.reason


def test_late_offset_fails_steady_band():
    tr = flat_trace(level=-0.02)
    v = verify_limits(tr, FREQ, transient_window=1.0)
    assert not v.passed and "post-event" in v.reason and v.settling_time is None


def test_settling_time():
    tr = flat_trace(n=11, last=2.0)
    tr.df_pu[:5] = -0.02  # outside r_ss until t = 4
    v = verify_limits(tr, FREQ, transient_window=3.0)
    assert v.passed and v.settling_time == pytest.approx(3.0)
    with pytest.raises(InvalidArgument):
        verify_limits(flat_trace(n=0), FREQ)


@pytest.mark.parametrize("p_b, robust, expected", [(0.0, False, 0.0), (4.5, False, 10.0), (4.5, True, 10.0 / 0.95)])
def test_min_damping(p_b, robust, expected):
    lim = FrequencyLimits(50.0, 0.01, 0.05, robust)
    assert min_damping(p_b, lim, 45.0) == pytest.approx(expected)


def test_min_damping_errors():
    with pytest.raises(InvalidArgument):
        min_damping(1.0, FrequencyLimits(50.0, 0.0, 0.03), 45.0)
    with pytest.raises(InvalidArgument):
        min_damping(-1.0, FREQ, 45.0)
    with pytest.raises(InvalidArgument):
        min_damping(1.0, FREQ, 0.0)
