"""Rate-energy trade-off curves at a fixed reliability level.

For a rate target R* the largest harvested-power target Q* with
P(R >= R*, Q >= Q*) >= level is found by bisection in dB, using that the
joint CCDF does not increase in Q*.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import analysis
from .params import SystemParams, dbm_to_watt, watt_to_dbm

Q_BRACKET_DBM = (-60.0, 0.0)
Q_TOL_DB = 0.1
Q_FLOOR_DBM = -150.0
Q_CEIL_DBM = 60.0


def default_rate_grid():
    """40 log-spaced rates from 10 kbit/s to 2 Mbit/s."""
    return list(np.logspace(math.log10(10e3), math.log10(2e6), 40))


@dataclass(frozen=True)
class TradeoffPoint:
    r_star: float
    q_star: float
    level: float
    tol_db: float = Q_TOL_DB

    @property
    def q_star_dbm(self):
        return float(watt_to_dbm(self.q_star))


@dataclass(frozen=True)
class Bracket:
    """Final bisection bracket in dBm: F(lo) >= level > F(hi)."""

    lo_dbm: float
    hi_dbm: float
    f_lo: float
    f_hi: float


def _check_level(level):
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")


def _bracket_q(f, level):
    """Bracket the crossing of f(q_dBm) with ``level``, or None if infeasible."""
    lo, hi = Q_BRACKET_DBM
    f_lo = f(lo)
    if f_lo < level:
        while f_lo < level:
            if lo <= Q_FLOOR_DBM:
                return None
            hi, f_hi = lo, f_lo
            lo = max(lo - 30.0, Q_FLOOR_DBM)
            f_lo = f(lo)
        return Bracket(lo, hi, f_lo, f_hi)
    f_hi = f(hi)
    while f_hi >= level:
        if hi >= Q_CEIL_DBM:
            raise ArithmeticError(f"joint CCDF still above level at {hi:g} dBm")
        lo, f_lo = hi, f_hi
        hi = min(hi + 20.0, Q_CEIL_DBM)
        f_hi = f(hi)
    return Bracket(lo, hi, f_lo, f_hi)


def solve_q_bracket(params: SystemParams, policy, r_star, level, tol_db=Q_TOL_DB):
    """Bisection bracket for the harvested power reachable at ``r_star``; None if infeasible."""
    _check_level(level)

    def f(q_dbm):
        return analysis.jccdf(params, policy, r_star, dbm_to_watt(q_dbm))

    br = _bracket_q(f, level)
    if br is None:
        return None
    lo, hi, f_lo, f_hi = br.lo_dbm, br.hi_dbm, br.f_lo, br.f_hi
    while hi - lo > tol_db:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm >= level:
            lo, f_lo = mid, fm
        else:
            hi, f_hi = mid, fm
    return Bracket(lo, hi, f_lo, f_hi)


def solve_q_at_rate(params: SystemParams, policy, r_star, level, tol_db=Q_TOL_DB):
    """Largest Q* (W) with jccdf(r_star, Q*) >= level, or None when infeasible."""
    br = solve_q_bracket(params, policy, r_star, level, tol_db)
    if br is None:
        return None
    return float(dbm_to_watt(0.5 * (br.lo_dbm + br.hi_dbm)))


@dataclass(frozen=True)
class Curve:
    points: list
    right_endpoint: float | None  # first infeasible rate of the grid, if any


def tradeoff_curve_full(params: SystemParams, policy, level, rate_grid):
    pts = []
    endpoint = None
    for r in sorted(float(x) for x in rate_grid):
        q = solve_q_at_rate(params, policy, r, level)
        if q is None:
            if endpoint is None:
                endpoint = r
            continue
        pts.append(TradeoffPoint(r, q, level))
    return Curve(pts, endpoint)


def tradeoff_curve(params: SystemParams, policy, level, rate_grid):
    """Trade-off points sorted by rate; infeasible rates are omitted."""
    return tradeoff_curve_full(params, policy, level, rate_grid).points


def envelope(params_list, policy, level, rate_grid):
    """Pointwise maximum of Q* over ``params_list`` at every feasible rate."""
    best = {}
    for prm in params_list:
        for pt in tradeoff_curve(prm, policy, level, rate_grid):
            if pt.r_star not in best or pt.q_star > best[pt.r_star].q_star:
                best[pt.r_star] = pt
    return [best[r] for r in sorted(best)]


def max_rate(params: SystemParams, policy, level, rel_tol=1e-4):
    """Largest R* that is feasible at ``level`` (rate-only constraint).

    Feasibility means jccdf(R*, q_min) >= level with q_min at the power floor.
    """
    _check_level(level)
    q_min = dbm_to_watt(Q_FLOOR_DBM)

    def f(r):
        return analysis.jccdf(params, policy, r, q_min)

    lo, hi = 1e3, 1e6
    while f(lo) < level:
        hi, lo = lo, lo / 10.0
        if lo < 1e-3:
            return 0.0
    while f(hi) >= level:
        lo, hi = hi, hi * 10.0
    while hi - lo > rel_tol * lo:
        mid = math.sqrt(lo * hi)
        if f(mid) >= level:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def rate_at_q(params: SystemParams, policy, q_star, level, rel_tol=1e-3):
    """Largest R* with jccdf(R*, q_star) >= level (0 when none)."""
    _check_level(level)

    def f(r):
        return analysis.jccdf(params, policy, r, q_star)

    lo = 1.0
    if f(lo) < level:
        return 0.0
    hi = max_rate(params, policy, level, rel_tol=rel_tol) * (1.0 + rel_tol)
    while hi - lo > rel_tol * lo:
        mid = math.sqrt(lo * hi)
        if f(mid) >= level:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def envelope_rate_at_q(params_list, policy, q_star, level, rel_tol=1e-3):
    """Rate reached by the envelope at harvested power ``q_star``."""
    return max(rate_at_q(prm, policy, q_star, level, rel_tol) for prm in params_list)
