import math

import numpy as np
import pytest

from indoorswipt import analysis as an
from indoorswipt import tradeoff as tr
from indoorswipt.params import SystemParams, dbm_to_watt, watt_to_dbm

POL = an.DEFAULT_POLICY


def _toy_shape(params):
    # rate scale, logistic centre (dBm) and width (dB)
    r0 = 1e6 * params.lambda_ph / SystemParams().lambda_ph
    return r0, 200.0 * params.lambda_w - 30.0, 6.0 * params.rho


def synthetic(params, policy, r_star, q_star):
    # separable toy CCDF: exp(-r / r0) times a decreasing logistic in dBm
    r0, c, w = _toy_shape(params)
    q = float(watt_to_dbm(q_star))
    return math.exp(-r_star / r0) / (1.0 + math.exp((q - c) / w))


def synthetic_q(params, r_star, level):
    r0, c, w = _toy_shape(params)
    a = math.exp(-r_star / r0)
    return c + w * math.log(a / level - 1.0) if a > level else None


@pytest.fixture
def toy(monkeypatch):
    monkeypatch.setattr(an, "jccdf", synthetic)


def test_default_rate_grid():
    g = tr.default_rate_grid()
    assert len(g) == 40
    assert g[0] == pytest.approx(10e3) and g[-1] == pytest.approx(2e6)
    assert np.allclose(np.diff(np.log(g)), math.log(200) / 39)


def test_solution_within_tolerance(toy):
    p = SystemParams()
    for r in (1e4, 2e5, 5e5):
        q = tr.solve_q_at_rate(p, POL, r, 0.3)
        assert abs(watt_to_dbm(q) - synthetic_q(p, r, 0.3)) <= 0.5 * tr.Q_TOL_DB


def test_bracket_straddles_level(toy):
    p = SystemParams()
    br = tr.solve_q_bracket(p, POL, 1e5, 0.6)
    assert br.hi_dbm - br.lo_dbm <= tr.Q_TOL_DB
    assert br.f_lo >= 0.6 > br.f_hi
    assert br.f_lo == synthetic(p, POL, 1e5, dbm_to_watt(br.lo_dbm))


def test_bracket_expands_beyond_initial_interval(toy):
    # crossing above 0 dBm and below -60 dBm
    high = SystemParams(lambda_w=0.35)
    low = SystemParams(lambda_w=0.0, rho=0.9)
    q_hi = tr.solve_q_at_rate(high, POL, 1e3, 0.5)
    assert watt_to_dbm(q_hi) == pytest.approx(synthetic_q(high, 1e3, 0.5), abs=tr.Q_TOL_DB)
    assert watt_to_dbm(q_hi) > 0
    q_lo = tr.solve_q_at_rate(low, POL, 100.0, 0.999)
    assert watt_to_dbm(q_lo) == pytest.approx(synthetic_q(low, 100.0, 0.999), abs=tr.Q_TOL_DB)
    assert watt_to_dbm(q_lo) < -60


def test_infeasible_rate(toy):
    p = SystemParams()
    assert tr.solve_q_at_rate(p, POL, 2e6, 0.75) is None


def test_level_must_be_probability(toy):
    with pytest.raises(ValueError):
        tr.solve_q_at_rate(SystemParams(), POL, 1e5, 1.0)
    with pytest.raises(ValueError):
        tr.max_rate(SystemParams(), POL, 0.0)


def test_higher_level_needs_less_power(toy):
    p = SystemParams()
    assert tr.solve_q_at_rate(p, POL, 1e5, 0.9) <= tr.solve_q_at_rate(p, POL, 1e5, 0.5)


def test_curve_sorted_with_right_endpoint(toy):
    p = SystemParams()
    grid = [8e5, 1e4, 3e5, 1.5e6, 1e5]
    full = tr.tradeoff_curve_full(p, POL, 0.3, grid)
    rates = [pt.r_star for pt in full.points]
    assert rates == sorted(rates) == [1e4, 1e5, 3e5, 8e5]
    # exp(-r / 1e6) = 0.3 at r = 1.204 Mbit/s
    assert full.right_endpoint == 1.5e6
    assert all(pt.level == 0.3 for pt in full.points)
    assert tr.tradeoff_curve(p, POL, 0.3, grid) == full.points


def test_empty_grid(toy):
    assert tr.tradeoff_curve(SystemParams(), POL, 0.5, []) == []
    assert tr.envelope([SystemParams()], POL, 0.5, []) == []


def test_envelope_of_one_is_the_curve(toy):
    p = SystemParams()
    grid = [1e4, 1e5, 5e5]
    assert tr.envelope([p], POL, 0.5, grid) == tr.tradeoff_curve(p, POL, 0.5, grid)


def test_envelope_dominates_members(toy):
    members = [SystemParams(lambda_w=0.0), SystemParams(lambda_w=0.05).with_spacing(3.0), SystemParams().with_spacing(7.0)]
    grid = list(np.geomspace(1e4, 2e6, 12))
    env = {pt.r_star: pt.q_star for pt in tr.envelope(members, POL, 0.5, grid)}
    for m in members:
        for pt in tr.tradeoff_curve(m, POL, 0.5, grid):
            assert env[pt.r_star] >= pt.q_star
    # the denser member keeps the envelope feasible where the sparse ones are not
    assert max(env) > max(pt.r_star for pt in tr.tradeoff_curve(members[2], POL, 0.5, grid))


def test_max_rate_and_rate_at_q(toy):
    p = SystemParams()
    exact = -1e6 * math.log(0.5)
    assert tr.max_rate(p, POL, 0.5) == pytest.approx(exact, rel=2e-4)
    # at c = -20 dBm the logistic is 1/2, so exp(-r/R0) / 2 >= 0.25 up to R0 ln 2
    assert tr.rate_at_q(p, POL, dbm_to_watt(-20.0), 0.25) == pytest.approx(exact, rel=2e-3)
    assert tr.rate_at_q(p, POL, dbm_to_watt(10.0), 0.5) == 0.0
    members = [p, p.with_spacing(2.0)]
    assert tr.envelope_rate_at_q(members, POL, dbm_to_watt(-20.0), 0.25) == pytest.approx(
        max(tr.rate_at_q(m, POL, dbm_to_watt(-20.0), 0.25) for m in members)
    )


def test_point_power_in_dbm():
    pt = tr.TradeoffPoint(1e5, 1e-5, 0.75)
    assert pt.q_star_dbm == pytest.approx(-20.0)


# -- against the analytic model ---------------------------------------------------


def test_analytic_solution_and_level_ordering():
    p = SystemParams().with_spacing(3.0).replace(lambda_w=0.0)
    b9 = tr.solve_q_bracket(p, POL, 50e3, 0.9)
    b5 = tr.solve_q_bracket(p, POL, 50e3, 0.5)
    for br, lev in ((b9, 0.9), (b5, 0.5)):
        assert br.f_lo >= lev > br.f_hi
        assert br.hi_dbm - br.lo_dbm <= tr.Q_TOL_DB
        mid = an.jccdf(p, POL, 50e3, dbm_to_watt(0.5 * (br.lo_dbm + br.hi_dbm)))
        assert br.f_hi - 1e-9 <= mid <= br.f_lo + 1e-9
    assert b9.hi_dbm <= b5.lo_dbm


def test_analytic_infeasible_rate():
    p = SystemParams().with_spacing(7.0).replace(lambda_w=0.0)
    assert tr.solve_q_at_rate(p, POL, 5e6, 0.75) is None
