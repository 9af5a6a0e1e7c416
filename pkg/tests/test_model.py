import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcsizing.config import load_config
from fcsizing.model import (
    InputValidationError,
    ScenarioMode,
    Schedule,
    SizingInputs,
    _repair_runs,
    battery_fcr_requirement,
    build_problem,
    commitment_heuristic,
    count_envelope,
    extract_schedule,
    ramp_requirements,
    short_term_feasibility,
)
from fcsizing.ramps import RampEvent, RampHull
from fcsizing.solve import Status, check_feasible, solve

from helpers import day_inputs, reference_optimum, small_inputs, benchmark_hull

ALL_MODES = list(ScenarioMode)


def one_hour(mode, load=160.0, irr=0.9, hull=True):
    return build_problem(mode, small_inputs([load], [irr], [0] if hull else []))


# -- structure --------------------------------------------------------------

def test_baseline_one_hour_peak():
    p = one_hour(ScenarioMode.BASELINE)
    rho = p.index["rho"]
    assert len(rho) == 4 and all(p.integer[j] for j in rho.values())
    assert "P_pv_inst" not in p.index and "P_bat_inst" not in p.index
    sol = solve(p, 1e-6)
    assert sol.status is Status.OPTIMAL
    assert [round(sol.x[j]) for j in rho.values()] == [1, 1, 1, 1]
    assert check_feasible(p, sol.x).feasible


def test_nofc_has_no_reserve_variables():
    p = one_hour(ScenarioMode.NOFC)
    for sym in ("P_fcr", "P_sud", "P_pv_dist", "P_bat_fcr", "P_bat_inst"):
        assert sym not in p.index
    assert "P_pv_inst" in p.index
    for fam in ("sudden", "pv_disturbance", "frr_up", "frr_down", "battery_fcr", "fcr_cap"):
        assert fam not in p.families


def test_dynamic_battery_rows_one_per_ramp():
    p = one_hour(ScenarioMode.DYNAMICFC)
    assert len(p.families["battery_fcr"]) == 4
    assert len(p.families["pv_disturbance"]) == 4
    assert p.lb[p.index["P_bat_inst"]] == 0.0


def test_static_battery_rows_ignore_gt_fcr():
    ps, pd = one_hour(ScenarioMode.STATICFC), one_hour(ScenarioMode.DYNAMICFC)
    fcr_s = set(ps.index["P_fcr"].values())
    fcr_d = set(pd.index["P_fcr"].values())
    for i in ps.families["battery_fcr"]:
        assert not fcr_s & set(ps.A[i].indices)
    for i in pd.families["battery_fcr"]:
        assert len(fcr_d & set(pd.A[i].indices)) == 4


@pytest.mark.parametrize("mode", ALL_MODES)
def test_build_is_deterministic(mode):
    inp = day_inputs(hours=6)
    assert build_problem(mode, inp).dump() == build_problem(mode, inp).dump()


@pytest.mark.parametrize("mode", [ScenarioMode.STATICFC, ScenarioMode.DYNAMICFC])
def test_pv_disturbance_rows_match_hull_size(mode):
    inp = day_inputs(hours=8, ramps_every=2)
    p = build_problem(mode, inp)
    per_hour = {}
    for i in p.families["pv_disturbance"]:
        h = int(p.row_names[i].split("_")[1])
        per_hour[h] = per_hour.get(h, 0) + 1
    assert per_hour == {h: len(inp.hulls[h]) for h in range(inp.horizon) if len(inp.hulls[h])}


def test_symbols_have_one_slot_each():
    p = build_problem(ScenarioMode.DYNAMICFC, day_inputs(hours=4))
    seen = {}
    for sym, entry in p.index.items():
        cols = [entry] if isinstance(entry, (int, np.integer)) else list(entry.values())
        for j in cols:
            assert j not in seen, f"{p.var_names[j]} under {sym} and {seen[j]}"
            seen[j] = sym
    for sym in ("P", "rho", "u", "v", "P_fcr", "A_pv", "P_inj", "P_pv_inst", "P_bat_fcr", "P_bat_inst",
                "P_sud", "P_pv_dist"):
        assert sym in p.index


def test_series_length_mismatch_lists_series():
    cfg = load_config()
    with pytest.raises(InputValidationError, match="load=2.*irradiance_mean=3"):
        SizingInputs(np.array([100.0, 100.0]), np.zeros(3), (RampHull(0),) * 2, cfg.plant, cfg.econ)
    with pytest.raises(InputValidationError):
        SizingInputs(np.array([0.0]), np.zeros(1), (RampHull(0),), cfg.plant, cfg.econ)


def test_mode_parse():
    assert ScenarioMode.parse("static-fc") is ScenarioMode.STATICFC
    assert ScenarioMode.parse("No FC") is ScenarioMode.NOFC
    with pytest.raises(ValueError):
        ScenarioMode.parse("wild")


def test_window_and_tight_commitment_agree():
    inp = day_inputs(hours=10, seed=3)
    a = build_problem(ScenarioMode.NOFC, inp, commitment="window", unit_count=False)
    b = build_problem(ScenarioMode.NOFC, inp, commitment="tight", unit_count=False)
    fa, _ = reference_optimum(a)
    fb, _ = reference_optimum(b)
    assert fa == pytest.approx(fb, rel=1e-6)


@pytest.mark.parametrize("mode", ALL_MODES)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_unit_counts_keep_the_optimum(mode, seed):
    """The count variables and their area envelopes cut off no optimal schedule."""
    inp = day_inputs(hours=9, seed=seed, ramps_every=2)
    plain = build_problem(mode, inp, unit_count=False)
    counted = build_problem(mode, inp)
    assert "count_envelope" in counted.families or mode is ScenarioMode.BASELINE
    f0, _ = reference_optimum(plain)
    f1, _ = reference_optimum(counted)
    assert f1 == pytest.approx(f0, rel=1e-6)


def test_count_envelope_is_valid_pointwise():
    inp = day_inputs(hours=9, seed=4, ramps_every=2)
    mode = ScenarioMode.STATICFC
    a_max = inp.plant.pv_inst_max / inp.irradiance_mean.max()
    for h in range(inp.horizon):
        n_min, segs = count_envelope(inp, mode, h, a_max)
        # fix the area and the count, check the LP is infeasible exactly when the envelope says so
        for a1, n1, a2, n2 in segs:
            assert a2 > a1 and n1 != n2
        assert n_min is not None and 0 <= n_min <= 4


def test_removing_dominated_ramp_keeps_optimum():
    inp = day_inputs(hours=6, seed=5, ramps_every=1)
    hulls = list(inp.hulls)
    k = next(h for h in range(inp.horizon) if hulls[h].events)
    extra = RampEvent(k, 60.0, hulls[k].events[0].drop)  # longer and no deeper: dominated
    hulls[k] = RampHull(k, hulls[k].events + (extra,))
    padded = SizingInputs(inp.load, inp.irradiance_mean, tuple(hulls), inp.plant, inp.econ)
    for mode in (ScenarioMode.STATICFC, ScenarioMode.DYNAMICFC):
        f0, _ = reference_optimum(build_problem(mode, inp))
        f1, _ = reference_optimum(build_problem(mode, padded))
        assert f1 == pytest.approx(f0, rel=1e-7)


# -- battery algebra -------------------------------------------------------

@pytest.mark.parametrize("args, expected", [
    ((22.5, 0, 22.656, 3 * 0.208 * 19), 33.3),
    ((22.5, 22.5, 22.656, 3 * 0.208 * 19), 10.8),
    ((22.5, 22.5, 22.752, 3 * 0.208 * 48), 0.0),
    ((0, 0, 0, 0), 0.0),
])
def test_battery_fcr_requirement(args, expected):
    assert battery_fcr_requirement(*args) == pytest.approx(expected, abs=0.001)


nonneg = st.floats(0, 200, allow_nan=False)


@given(nonneg, nonneg, nonneg, nonneg)
def test_dynamic_is_static_minus_fcr(p_sud, fcr, dp, frr):
    static = battery_fcr_requirement(p_sud, 0.0, dp, frr)
    dynamic = battery_fcr_requirement(p_sud, fcr, dp, frr)
    assert dynamic <= static
    assert dynamic == pytest.approx(max(0.0, (p_sud + dp - frr) - fcr), abs=1e-9)
    if static > 0:
        assert dynamic == pytest.approx(max(0.0, static - fcr), abs=1e-9)


@pytest.mark.parametrize("fcr, dp, expected", [(22.5, 22.656, True), (0.0, 22.656, False), (0.0, 0.0, True)])
def test_short_term_feasibility(fcr, dp, expected):
    assert short_term_feasibility([0.208] * 3, [fcr / 3] * 3, dp, 19.0) is expected


def test_short_term_feasibility_needs_duration():
    with pytest.raises(ValueError):
        short_term_feasibility([0.2], [1.0], 1.0, 0.0)


# -- schedules -------------------------------------------------------------

def solved_schedule(mode=ScenarioMode.DYNAMICFC, hours=6, seed=1):
    inp = day_inputs(hours=hours, seed=seed, ramps_every=1)
    p = build_problem(mode, inp)
    sol = solve(p, 1e-4, rounding=[commitment_heuristic(p, inp, mode)])
    return inp, p, sol, extract_schedule(mode, p, sol, inp)


def test_schedule_round_trip_and_requirements():
    inp, p, sol, sc = solved_schedule()
    assert Schedule.from_json(sc.to_json()) == sc
    assert sc.mode == "DynamicFC" and sc.horizon == inp.horizon
    for h in range(inp.horizon):
        reqs = ramp_requirements(sc, inp.plant, inp.hulls[h], h)
        assert len(reqs) == len(inp.hulls[h])
        for r in reqs:
            assert r <= sc.p_bat_inst + 1e-5
    # static view of the same schedule ignores GT FCR, so it asks at least as much
    for h in range(inp.horizon):
        dyn = ramp_requirements(sc, inp.plant, inp.hulls[h], h)
        sta = ramp_requirements(sc, inp.plant, inp.hulls[h], h, use_gt_fcr=False)
        assert all(s >= d - 1e-9 for s, d in zip(sta, dyn))


@given(st.lists(st.booleans(), min_size=1, max_size=30), st.integers(1, 6), st.integers(1, 6))
def test_repair_runs(on, t_up, t_dn):
    on = np.array(on)
    out = _repair_runs(on, t_up, t_dn)
    assert np.all(out >= on)
    # inner off gaps are at least t_dn long; on-runs starting after 0 are t_up long or reach the end
    H = len(out)
    h = 0
    while h < H:
        k = h
        while k < H and out[k] == out[h]:
            k += 1
        if not out[h] and k < H:
            assert k - h >= t_dn
        if out[h] and h > 0 and k < H:
            assert k - h >= t_up
        h = k


@pytest.mark.parametrize("mode", [ScenarioMode.STATICFC, ScenarioMode.DYNAMICFC, ScenarioMode.NOFC])
def test_heuristic_candidates_are_consistent(mode):
    inp = day_inputs(hours=10, seed=2, ramps_every=2)
    p = build_problem(mode, inp)
    x = np.clip(np.random.default_rng(0).uniform(0, 1, p.n_vars), p.lb, np.minimum(p.ub, 1e3))
    for y in commitment_heuristic(p, inp, mode)(x):
        rho = np.array([[y[p.index["rho"][m, h]] for h in range(inp.horizon)] for m in range(4)])
        assert set(np.unique(rho)) <= {0.0, 1.0}
        for h in range(inp.horizon):
            assert y[p.index["N_on"][h]] == rho[:, h].sum()
