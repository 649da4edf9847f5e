import math

import numpy as np
import pytest
from scipy import integrate, stats

from indoorswipt.channel import (
    GainPdfCoefficients,
    gain_cdf,
    gain_cf,
    gain_mass,
    gain_mean,
    gain_pdf,
    gain_pdf_coeffs,
    path_loss,
    sample_fading,
    sample_mimo_gain,
)
from indoorswipt.params import SystemParams

# (4 pi 2.1e9 / 299792458)**2 evaluated with 30-digit arithmetic
KAPPA_2_1_GHZ = 7748.48705205393486832815711145


def test_kappa_regression():
    assert SystemParams().kappa == pytest.approx(KAPPA_2_1_GHZ, rel=1e-14)


def test_path_loss_unit_distance_and_walls():
    p = SystemParams()
    assert path_loss(p, 1.0, 0) == pytest.approx(p.kappa)
    assert path_loss(p, 1.0, 2) == pytest.approx(100.0 * p.kappa)


def test_path_loss_monotone():
    p = SystemParams()
    r = np.linspace(0.1, 60, 50)
    assert np.all(np.diff(path_loss(p, r, 0)) > 0)
    assert np.all(np.diff(path_loss(p, 5.0, np.arange(6))) > 0)


def test_path_loss_rejects_origin():
    with pytest.raises(ValueError):
        path_loss(SystemParams(), 0.0, 0)


def test_fading_mean_and_median():
    h = sample_fading(np.random.default_rng(0), 1_000_000)
    assert np.mean(h) == pytest.approx(1.0, abs=0.005)
    assert np.mean(h > math.log(2)) == pytest.approx(0.5, abs=0.002)
    assert np.array_equal(sample_fading(np.random.default_rng(1), 5), sample_fading(np.random.default_rng(1), 5))


def test_scalar_gain_is_exponential():
    g = sample_mimo_gain(1, 1, np.random.default_rng(2), 200_000)
    assert np.mean(g) == pytest.approx(1.0, abs=0.01)


def test_two_transmit_antennas_gamma_two():
    g = sample_mimo_gain(2, 1, np.random.default_rng(3), 200_000)
    assert np.mean(g) == pytest.approx(2.0, abs=0.02)
    assert stats.kstest(g, stats.gamma(2).cdf).statistic < 0.01


def test_closed_form_eigenvalue_matches_numpy():
    rng = np.random.default_rng(4)
    g = sample_mimo_gain(4, 2, np.random.default_rng(4), 50)
    h = (rng.standard_normal((50, 2, 4)) + 1j * rng.standard_normal((50, 2, 4))) / math.sqrt(2)
    ref = np.linalg.eigvalsh(h @ np.conj(np.swapaxes(h, 1, 2)))[:, -1]
    assert np.allclose(g, ref, rtol=1e-12)


def test_coeffs_single_antenna():
    c = gain_pdf_coeffs(1, 1)
    assert [(s, t) for s, t, _ in c.terms] == [(1, 0)]
    z = np.linspace(0, 10, 11)
    assert np.allclose(gain_pdf(c, z), np.exp(-z), rtol=1e-14)
    assert gain_pdf(c, 0.0) == pytest.approx(1.0)


def test_coeffs_two_by_one_is_gamma_two():
    c = gain_pdf_coeffs(2, 1)
    assert [(s, t) for s, t, _ in c.terms] == [(1, 1)]
    z = np.linspace(0, 10, 11)
    assert np.allclose(gain_pdf(c, z), z * np.exp(-z), rtol=1e-14)


@pytest.mark.parametrize("nt,nr", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 2), (4, 4), (8, 2), (6, 3)])
def test_density_normalised_and_nonnegative(nt, nr):
    c = gain_pdf_coeffs(nt, nr)
    assert gain_mass(c) == pytest.approx(1.0, abs=1e-10)
    z = np.linspace(0, 50, 2001)
    assert np.all(gain_pdf(c, z) >= -1e-12)
    quad = integrate.quad(lambda x: gain_pdf(c, x), 0, np.inf, limit=200)[0]
    assert quad == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("nt,nr", [(1, 1), (2, 1), (2, 2), (4, 2), (8, 2)])
def test_mean_matches_samples(nt, nr):
    c = gain_pdf_coeffs(nt, nr)
    g = sample_mimo_gain(nt, nr, np.random.default_rng(nt * 10 + nr), 100_000)
    assert abs(np.mean(g) - gain_mean(c)) < 3 * np.std(g) / math.sqrt(g.size)


def test_density_matches_largest_eigenvalue_samples():
    c = gain_pdf_coeffs(4, 2)
    g = sample_mimo_gain(4, 2, np.random.default_rng(6), 100_000)
    assert stats.kstest(g, lambda x: gain_cdf(c, x)).statistic <= 0.01


def test_terms_within_exponent_ranges():
    for m, n in [(2, 4), (3, 3), (2, 8)]:
        c = gain_pdf_coeffs(n, m)
        for s, t, _ in c.terms:
            assert 1 <= s <= m
            assert n - m <= t <= (n + m - 2 * s) * s


def test_coeffs_symmetric_in_antenna_roles():
    assert gain_pdf_coeffs(4, 2) == gain_pdf_coeffs(2, 4)


def test_more_transmit_antennas_dominate():
    z = np.linspace(0, 30, 301)
    assert np.all(gain_cdf(gain_pdf_coeffs(4, 2), z) <= gain_cdf(gain_pdf_coeffs(2, 2), z) + 1e-14)


def test_cdf_consistent_with_density():
    c = gain_pdf_coeffs(4, 2)
    for x in (0.5, 2.0, 7.0, 15.0):
        assert gain_cdf(c, x) == pytest.approx(integrate.quad(lambda u: gain_pdf(c, u), 0, x)[0], abs=1e-12)


def test_coeffs_json_round_trip():
    c = gain_pdf_coeffs(4, 2)
    assert GainPdfCoefficients.from_json(c.to_json()) == c


def test_gain_cf_against_quadrature():
    c = gain_pdf_coeffs(4, 2)
    assert gain_cf(c, 0.0) == pytest.approx(1.0, abs=1e-12)
    for w in (0.3, 2.0, 9.0):
        re = integrate.quad(lambda x: gain_pdf(c, x) * math.cos(w * x), 0, np.inf, limit=400)[0]
        im = integrate.quad(lambda x: gain_pdf(c, x) * math.sin(w * x), 0, np.inf, limit=400)[0]
        assert abs(gain_cf(c, w) - complex(re, im)) < 1e-8
