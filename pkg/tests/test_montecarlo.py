import math

import numpy as np
import pytest
from scipy import stats

from indoorswipt import analysis as an
from indoorswipt.channel import path_loss
from indoorswipt.errors import InsufficientSamplesError
from indoorswipt.geometry import PhRealization, WallRealization
from indoorswipt.montecarlo import (
    Replication,
    Samples,
    assemble_replication,
    empirical_min_loss_cdf,
    estimate_jccdf,
    jccdf_from_samples,
    rate_and_power,
    read_jsonl,
    run_replication,
    sample_arrays,
    simulate,
    stratified_interference_cdf,
    write_jsonl,
)
from indoorswipt.params import SystemParams

POL = an.DEFAULT_POLICY
NO_WALLS = WallRealization(np.array([]), np.array([]))


def single_ph(r=1.0, n_walls=0):
    return PhRealization(np.array([r]), np.array([0.3]), np.array([n_walls]))


def test_forced_single_ph():
    p = SystemParams()
    rep = assemble_replication(p, NO_WALLS, single_ph(), 1.0, np.array([0.7]))
    assert rep.serving_index == 0
    assert rep.i_mu == 0.0
    assert rep.q_harv == pytest.approx(p.rho * p.xi * p.p_tx / p.kappa, rel=1e-14)
    snr = (p.p_tx / p.kappa) / p.sigma_star2
    assert rep.rate == pytest.approx(p.b_c * math.log2(1 + snr), rel=1e-14)


def test_serving_head_is_min_loss_and_excluded():
    p = SystemParams()
    phs = PhRealization(np.array([10.0, 2.0, 4.0, 3.0]), np.zeros(4), np.array([0, 1, 0, 2]))
    fading = np.array([1.0, 5.0, 2.0, 3.0])
    rep = assemble_replication(p, NO_WALLS, phs, 2.5, fading)
    loss = path_loss(p, phs.r, phs.n_walls)
    assert rep.serving_index == 2
    assert rep.l0 == pytest.approx(loss[2])
    expect = sum(fading[i] / loss[i] for i in (0, 1, 3))
    assert rep.i_mu == pytest.approx(expect, rel=1e-14)


def test_ties_go_to_lowest_index():
    p = SystemParams()
    phs = PhRealization(np.array([3.0, 3.0]), np.array([0.0, 1.0]), np.array([0, 0]))
    rep = assemble_replication(p, NO_WALLS, phs, 1.0, np.ones(2))
    assert rep.serving_index == 0
    # equal-loss head is not an interferer
    assert rep.i_mu == 0.0


def test_void_replication():
    p = SystemParams()
    empty = PhRealization(np.array([]), np.array([]), np.array([], dtype=int))
    rep = assemble_replication(p, NO_WALLS, empty, 0.0, np.zeros(0))
    assert rep.void and math.isinf(rep.l0)
    assert rep.rate == 0.0 and rep.q_harv == 0.0


def test_void_replications_from_sparse_network():
    p = SystemParams(lambda_ph=1e-4)  # about one head per disk
    reps = simulate(p, 400, np.random.default_rng(0))
    void = np.mean([r.void for r in reps])
    p_void = math.exp(-p.mean_ph_count)
    assert abs(void - p_void) < 4 * math.sqrt(p_void * (1 - p_void) / 400)
    s = Samples.from_replications(reps)
    est, _ = jccdf_from_samples(s, 1e-9, 1e-30)
    assert est == pytest.approx(1 - void)


def test_seed_determinism():
    p = SystemParams()
    a = run_replication(p, np.random.default_rng(12))
    b = run_replication(p, np.random.default_rng(12))
    assert a.to_dict() == b.to_dict()


def test_replication_invariants():
    p = SystemParams().with_spacing(3.0).replace(lambda_w=0.05)
    rng = np.random.default_rng(3)
    for rep in simulate(p, 60, rng):
        loss = path_loss(p, rep.phs.r, rep.phs.n_walls)
        assert rep.serving_index == int(np.argmin(loss))
        # energy accounting
        lhs = rep.q_harv / (p.rho * p.xi * p.p_tx) - rep.g0 / rep.l0
        assert lhs == pytest.approx(rep.i_mu, rel=1e-9, abs=1e-300)
        rate, q = rate_and_power(p, rep.g0, rep.l0, rep.i_mu)
        assert rate == rep.rate and q == rep.q_harv
        assert rep.i_mu < np.sum(1.0 / loss[loss > rep.l0]) * 50


def test_interference_decreases_with_spacing_and_walls():
    rng = np.random.default_rng(4)
    dense = sample_arrays(SystemParams().with_spacing(3.0), 1500, rng).i_mu.mean()
    sparse = sample_arrays(SystemParams().with_spacing(7.0), 1500, rng).i_mu.mean()
    assert dense > sparse
    open_plan = sample_arrays(SystemParams(lambda_w=0.0), 1500, rng).i_mu.mean()
    walled = sample_arrays(SystemParams(lambda_w=0.05), 1500, rng).i_mu.mean()
    assert open_plan > walled


def test_estimator_extremes_and_errors():
    p = SystemParams().with_spacing(3.0)
    est, half = estimate_jccdf(p, 1.0, 1e-20, 200, np.random.default_rng(5))
    assert est == 1.0 and half == 0.0
    est, _ = estimate_jccdf(p, 1e12, 1e-20, 200, np.random.default_rng(5))
    assert est == 0.0
    with pytest.raises(InsufficientSamplesError):
        estimate_jccdf(p, 1.0, 1e-20, 99, np.random.default_rng(5))


def test_half_width_formula_and_broadcast():
    s = Samples(*(np.zeros(400) for _ in range(3)), np.r_[np.ones(100), np.zeros(300)], np.ones(400))
    est, half = jccdf_from_samples(s, 0.5, 0.5)
    assert est == 0.25
    assert half == pytest.approx(1.96 * math.sqrt(0.25 * 0.75 / 400))
    grid, _ = jccdf_from_samples(s, np.array([[0.0], [2.0]]), np.array([0.5, 2.0]))
    assert grid.tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_min_loss_no_walls_matches_closed_form():
    p = SystemParams().with_spacing(5.0).replace(lambda_w=0.0)
    ecdf = empirical_min_loss_cdf(p, 10_000, np.random.default_rng(6))
    assert ecdf(0.0) == 0.0

    def closed(a):
        reach = np.minimum((np.asarray(a) / p.kappa) ** (1 / p.beta), p.r_d)
        return 1 - np.exp(-p.lambda_ph * math.pi * reach**2)

    def analytic(a):
        return np.array([an.min_loss_cdf(p, POL, x) for x in np.atleast_1d(a)])

    alphas = np.geomspace(1e3, 1e8, 40)
    assert np.allclose(analytic(alphas), closed(alphas), atol=1e-10)
    ks = np.max(np.abs(ecdf(ecdf.x) - closed(ecdf.x)))
    assert ks <= 0.02


def test_interference_bin_holding_everything_is_unconditional():
    p = SystemParams().with_spacing(7.0)
    s = sample_arrays(p, 600, np.random.default_rng(7))
    step = stratified_interference_cdf(p, (0.0, math.inf), 600, np.random.default_rng(7))
    z = np.quantile(s.i_mu, [0.1, 0.5, 0.9])
    assert np.allclose(step(z), [np.mean(s.i_mu <= v) for v in z])


def test_interference_of_lone_heads_is_point_mass():
    # mean 0.01 heads per disk: nearly every non-void replication has a
    # single head and therefore no interference at all
    p = SystemParams(lambda_ph=0.01 / (math.pi * 60.0**2))
    step = stratified_interference_cdf(p, (0.0, math.inf), 60_000, np.random.default_rng(8))
    assert step(-1e-30) == 0.0
    assert step(0.0) >= 0.98


def test_void_replications_fall_in_no_bin():
    p = SystemParams(lambda_ph=1e-9)
    s = sample_arrays(p, 600, np.random.default_rng(8))
    assert np.all(np.isinf(s.l0)) and np.all(s.i_mu == 0.0)
    with pytest.raises(InsufficientSamplesError):
        stratified_interference_cdf(p, (0.0, math.inf), 600, np.random.default_rng(8))


def test_stratified_bin_too_small():
    p = SystemParams().with_spacing(7.0)
    with pytest.raises(InsufficientSamplesError, match="widen"):
        stratified_interference_cdf(p, (1e5, 1.01e5), 300, np.random.default_rng(9))


def test_stratified_interference_matches_analytic():
    # open plan, where blockage correlation between heads plays no role.  The
    # analytic conditional CDF moves noticeably across the bin, so it is
    # averaged over in-bin l0 quantiles instead of read at the midpoint.
    p = SystemParams().with_spacing(5.0).replace(lambda_w=0.0)
    lo, hi = 2.5e5, 3.0e5
    s = sample_arrays(p, 40_000, np.random.default_rng(5))
    inside = (s.l0 >= lo) & (s.l0 < hi)
    ys = np.quantile(s.l0[inside], (np.arange(8) + 0.5) / 8)
    step = stratified_interference_cdf(p, (lo, hi), 40_000, np.random.default_rng(5))
    assert step.n == np.count_nonzero(inside)
    z = np.quantile(s.i_mu[inside], np.linspace(0.01, 0.99, 40))
    ref = np.mean([[an.interference_cdf(p, POL, v, y) for v in z] for y in ys], axis=0)
    assert np.max(np.abs(step(z) - ref)) <= 0.03


def test_jsonl_round_trip(tmp_path):
    p = SystemParams().with_spacing(7.0)
    reps = simulate(p, 5, np.random.default_rng(10))
    reps.append(assemble_replication(p, NO_WALLS, PhRealization(np.array([]), np.array([]), np.array([], int)),
                                     0.0, np.zeros(0)))
    path = tmp_path / "reps.jsonl"
    write_jsonl(reps, path)
    back = read_jsonl(path)
    assert len(path.read_text().splitlines()) == 6
    assert [r.to_dict() for r in back] == [r.to_dict() for r in reps]
    assert isinstance(back[0], Replication)


def test_gain_draw_only_for_serving_link():
    # with every interferer fading set to zero the rate is the noise-limited one
    p = SystemParams()
    phs = PhRealization(np.array([2.0, 5.0, 9.0]), np.zeros(3), np.zeros(3, int))
    rep = assemble_replication(p, NO_WALLS, phs, 3.0, np.zeros(3))
    snr = 3.0 * p.p_tx / rep.l0 / p.sigma_star2
    assert rep.rate == pytest.approx(p.b_c * math.log2(1 + snr), rel=1e-14)


def test_samples_match_scipy_binomial_interval():
    s = Samples(*(np.zeros(1000) for _ in range(3)), np.r_[np.ones(300), np.zeros(700)], np.ones(1000))
    est, half = jccdf_from_samples(s, 0.5, 0.0)
    lo, hi = stats.norm.interval(0.95, loc=est, scale=math.sqrt(est * (1 - est) / 1000))
    assert half == pytest.approx((hi - lo) / 2, rel=1e-3)
