import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ISO7730_ROWS, fanger_pmv
from gappycomfort import comfort, sim
from gappycomfort.comfort import (
    CASES,
    ComfortClass,
    ComfortNumericError,
    EnvironmentSample,
    EnvRest,
    OccupantState,
    PersonalFactors,
    PmvResult,
    load_roster,
    occupant_pmv,
    pmv,
    ppd,
    save_roster,
    spatial_pmv_map,
    write_pmv_map,
)
from gappycomfort.config import scenario_roster
from gappycomfort.snapshots import Grid


def env(t, rh=50.0, v=0.1, tr=None):
    return EnvironmentSample(t, rh, t if tr is None else tr, v)


@pytest.mark.parametrize("inputs,expected", ISO7730_ROWS)
def test_iso7730_validation_rows(inputs, expected):
    ta, tr, v, rh, met, clo = inputs
    assert pmv(EnvironmentSample(ta, rh, tr, v), PersonalFactors(met, clo)).raw_pmv == pytest.approx(expected, abs=0.01)


def test_cool_anchor_case():
    r = pmv(EnvironmentSample(22, 60, 22, 0.10), PersonalFactors(1.2, 0.5))
    assert abs(r.pmv + 0.75) <= 0.05
    assert r.comfort_class is ComfortClass.COOL


def test_warm_case_sign():
    value = pmv(EnvironmentSample(27, 50, 27, 0.10), PersonalFactors(1.2, 0.5)).pmv
    assert 0 < value < 1
    assert value == pytest.approx(fanger_pmv(27, 27, 0.10, 50, 1.2, 0.5), abs=0.01)


@pytest.mark.parametrize("t", [18.0, 21.0, 24.0, 27.0])
def test_case_ordering(t):
    e = EnvironmentSample(t, 40, t, 0.1)
    values = [pmv(e, CASES[c]).raw_pmv for c in (1, 2, 3, 4)]
    assert values == sorted(values) and len(set(values)) == 4


valid_inputs = st.tuples(
    st.floats(10, 34), st.floats(10, 40), st.floats(0, 1.0), st.floats(0, 100),
    st.floats(0.8, 4.0), st.floats(0, 2.0),
)


@settings(max_examples=300, deadline=None)
@given(valid_inputs)
def test_matches_bisection_oracle(x):
    ta, tr, v, rh, met, clo = x
    ours = pmv(EnvironmentSample(ta, rh, tr, v), PersonalFactors(met, clo)).raw_pmv
    assert ours == pytest.approx(fanger_pmv(ta, tr, v, rh, met, clo), abs=0.01)


def test_monotone_in_air_temperature():
    p = PersonalFactors(1.2, 0.5)
    values = [pmv(env(t), p).raw_pmv for t in np.arange(15.0, 35.01, 0.25)]
    assert np.all(np.diff(values) > 0)


def test_monotone_in_met_and_clo():
    e = env(22.0)
    by_met = [pmv(e, PersonalFactors(m, 0.5)).raw_pmv for m in np.arange(0.8, 4.01, 0.1)]
    by_clo = [pmv(e, PersonalFactors(1.2, c)).raw_pmv for c in np.arange(0.0, 2.01, 0.05)]
    assert np.all(np.diff(by_met) > 0)
    assert np.all(np.diff(by_clo) > 0)


@pytest.mark.parametrize("case", [1, 2, 3, 4])
def test_continuity_bound_at_reference_cases(case):
    # literal bound: |dPMV| < 0.02 for |dT| < 0.1 K
    p = CASES[case]
    for ta in (18.0, 22.0, 26.0):
        a = pmv(env(ta, 40), p).raw_pmv
        b = pmv(env(ta + 0.099, 40), p).raw_pmv
        assert abs(b - a) < 0.02


@settings(max_examples=200, deadline=None)
@given(st.floats(10, 34), st.floats(1e-4, 0.1), st.floats(0, 100), st.floats(0, 1.0),
       st.floats(0.8, 4.0), st.floats(0, 2.0))
def test_no_jumps_across_envelope(ta, dt, rh, v, met, clo):
    # Lipschitz in t_air; any branch jump in fcl/hc would break this
    p = PersonalFactors(met, clo)
    a = pmv(env(ta, rh, v), p).raw_pmv
    b = pmv(env(ta + dt, rh, v), p).raw_pmv
    assert abs(b - a) <= 2.0 * dt


def test_clothing_factor_branch_is_continuous():
    e = env(22.0)
    lo = pmv(e, PersonalFactors(1.2, 0.078 / 0.155 - 1e-9)).raw_pmv
    hi = pmv(e, PersonalFactors(1.2, 0.078 / 0.155 + 1e-9)).raw_pmv
    assert abs(hi - lo) < 0.01


def test_ppd_floor_and_symmetry():
    assert ppd(0.0) == pytest.approx(5.0)
    for x in (0.3, 1.0, 2.2, 3.0):
        assert ppd(x) == pytest.approx(ppd(-x))
        assert 5.0 <= ppd(x) <= 100.0


def test_result_clamps_and_classes():
    r = PmvResult(raw_pmv=-3.4, ppd=100.0)
    assert r.pmv == -3.0 and r.raw_pmv == -3.4
    assert PmvResult(0.49, 10).comfort_class is ComfortClass.COMFORTABLE
    assert PmvResult(0.5, 10).comfort_class is ComfortClass.WARM
    assert PmvResult(-0.5, 10).comfort_class is ComfortClass.COOL
    assert PmvResult(-0.4999, 10).comfort_class is ComfortClass.COMFORTABLE


def test_input_validation():
    with pytest.raises(ValueError):
        EnvironmentSample(55, 50, 22, 0.1)
    with pytest.raises(ValueError):
        EnvironmentSample(22, 101, 22, 0.1)
    with pytest.raises(ValueError):
        EnvironmentSample(22, 50, 22, -0.1)
    with pytest.raises(ValueError):
        PersonalFactors(0.5, 0.5)
    with pytest.raises(ValueError):
        PersonalFactors(1.0, 2.5)


def test_non_convergence_reports_last_iterate(monkeypatch):
    monkeypatch.setattr(comfort, "MAX_ITERATIONS", 2)
    with pytest.raises(ComfortNumericError) as exc:
        pmv(env(22.0), PersonalFactors(1.2, 0.5))
    assert math.isfinite(exc.value.last_iterate)


# spatial maps

def test_uniform_field_has_zero_spread():
    m = spatial_pmv_map(np.full(12, 23.0), EnvRest(), PersonalFactors(1.2, 0.5))
    assert m.spread == 0.0
    assert len(m.values) == 12


def test_steady_state_warmest_cell_nearest_heater(cfg):
    model = cfg.model.with_(noise_std=0.0)
    field = sim.steady_state(model, 26.0)
    m = spatial_pmv_map(field, cfg.env_rest, PersonalFactors(1.2, 0.5))
    assert m.spread > 0
    warmest = int(np.argmax(m.values))
    assert model.heater_distance()[warmest] == pytest.approx(model.heater_distance().min())
    assert m.spread == pytest.approx(m.values.max() - m.values.min())


def test_preheat_analog_all_cool(cfg):
    from gappycomfort.cli import preheat_state

    field = preheat_state(cfg.model.with_(noise_std=0.0), 23.0, cfg.schedule)
    m = spatial_pmv_map(field, cfg.env_rest, PersonalFactors(1.2, 0.5))
    assert all(r.comfort_class is ComfortClass.COOL for r in m.results)
    assert -2.0 < m.min < m.max < -0.5


def test_map_errors_tagged_with_index():
    field = np.array([22.0, 22.0, 80.0])
    with pytest.raises(ValueError, match="grid index 2"):
        spatial_pmv_map(field, EnvRest(), PersonalFactors(1.2, 0.5))


def test_occupants_same_cell_identical():
    field = np.linspace(20, 25, 6)
    occ = [OccupantState("a", 3, CASES[2]), OccupantState("b", 3, CASES[2])]
    (_, ra), (_, rb) = occupant_pmv(occ, field, EnvRest())
    assert ra == rb


def test_occupants_warmer_cell_higher():
    field = np.array([21.0, 22.0])
    occ = [OccupantState("a", 0, CASES[1]), OccupantState("b", 1, CASES[1])]
    (_, ra), (_, rb) = occupant_pmv(occ, field, EnvRest())
    assert rb.raw_pmv > ra.raw_pmv
    assert rb.raw_pmv - ra.raw_pmv == pytest.approx(
        fanger_pmv(22, 22, 0.1, 40, 1.0, 0.5) - fanger_pmv(21, 21, 0.1, 40, 1.0, 0.5), abs=1e-3)


def test_same_case_differs_where_field_differs(cfg):
    grid = cfg.grid
    field = sim.steady_state(cfg.model.with_(noise_std=0.0), 24.0)
    occ = [OccupantState("x", grid.from_label("G9"), CASES[1]), OccupantState("y", grid.from_label("G16"), CASES[1])]
    (_, a), (_, b) = occupant_pmv(occ, field, cfg.env_rest)
    assert a.raw_pmv != b.raw_pmv
    # G9 is nearer the heater block
    assert a.raw_pmv > b.raw_pmv


def test_occupant_location_checked():
    with pytest.raises(ValueError):
        occupant_pmv([OccupantState("z", 7, CASES[1])], np.full(4, 22.0), EnvRest())


def test_env_rest_t_mrt_policy():
    assert EnvRest().at(23.0).t_mrt == 23.0
    assert EnvRest(t_mrt=21.0).at(23.0).t_mrt == 21.0


# files

def test_roster_round_trip(tmp_path):
    g = Grid()
    occ = scenario_roster("A", g)
    save_roster(occ, g, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "id,row,col,met,clo"
    assert load_roster(tmp_path / "r.csv", g) == occ


def test_roster_rejects_off_grid(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("id,row,col,met,clo\nS1,9,0,1.0,0.5\n")
    with pytest.raises(ValueError):
        load_roster(p, Grid())


def test_pmv_map_csv(tmp_path):
    g = Grid(2, 2)
    field = np.array([20.0, 22.0, 24.0, 26.0])
    m = spatial_pmv_map(field, EnvRest(), PersonalFactors(1.2, 0.5))
    write_pmv_map(tmp_path / "m.csv", g, field, m)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "row,col,t_air,pmv,ppd,class"
    assert len(lines) == 5
    col = [float(line.split(",")[3]) for line in lines[1:]]
    assert max(col) - min(col) == pytest.approx(m.spread, abs=1e-3)
