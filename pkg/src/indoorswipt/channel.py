"""Path loss, fading and the MRT/MRC serving-link gain.

The serving gain with MRT at the PH and MRC at the receiver is the largest
eigenvalue of H H^H for an i.i.d. CN(0, 1) channel matrix. Its density is a
finite sum of terms ``zeta**t * exp(-s * zeta)``; the coefficients are
obtained here by expanding the determinant form of the largest-eigenvalue
CDF of a complex central Wishart matrix in exact rational arithmetic.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import json
import math

import numpy as np
from scipy.special import gammainc

from .errors import RangeError
from .params import SystemParams


def path_loss(params: SystemParams, r, n_walls):
    """Attenuation kappa r**beta / K**n_walls (dimensionless)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path loss is undefined at r <= 0")
    out = params.kappa * r**params.beta / params.k_pen ** np.asarray(n_walls, dtype=float)
    return float(out) if out.ndim == 0 else out


def sample_fading(rng, size=None):
    """Unit-mean exponential power gain(s) of a Rayleigh link."""
    return rng.exponential(1.0, size)


def _largest_eig_2x2(a, b, c):
    # Hermitian [[a, b], [conj(b), c]] with real a, c
    half_tr = 0.5 * (a + c)
    return half_tr + np.sqrt((0.5 * (a - c)) ** 2 + np.abs(b) ** 2)


def sample_mimo_gain(n_t, n_r, rng, size=None):
    """Largest eigenvalue of H H^H, H an n_r x n_t matrix of CN(0, 1) entries.

    The smaller Gram matrix is used. For m = min(n_t, n_r) <= 2 the
    eigenvalue is computed in closed form.
    """
    if n_t < 1 or n_r < 1:
        raise ValueError("antenna counts must be >= 1")
    m, n = min(n_t, n_r), max(n_t, n_r)
    count = 1 if size is None else int(np.prod(size))
    h = (rng.standard_normal((count, m, n)) + 1j * rng.standard_normal((count, m, n))) / math.sqrt(2.0)
    if m == 1:
        lam = np.sum(np.abs(h[:, 0, :]) ** 2, axis=-1)
    elif m == 2:
        a = np.sum(np.abs(h[:, 0, :]) ** 2, axis=-1)
        c = np.sum(np.abs(h[:, 1, :]) ** 2, axis=-1)
        b = np.sum(h[:, 0, :] * np.conj(h[:, 1, :]), axis=-1)
        lam = _largest_eig_2x2(a, b, c)
    else:
        gram = h @ np.conj(np.swapaxes(h, 1, 2))
        lam = np.linalg.eigvalsh(gram)[:, -1]
    if size is None:
        return float(lam[0])
    return lam.reshape(size)


# ---------------------------------------------------------------------------
# Exact density of the largest eigenvalue
# ---------------------------------------------------------------------------

# An "exp-polynomial" is a dict {(s, t): Fraction} standing for
# sum c * x**t * exp(-s x).


def _ep_mul(p, q):
    out = {}
    for (s1, t1), c1 in p.items():
        for (s2, t2), c2 in q.items():
            key = (s1 + s2, t1 + t2)
            out[key] = out.get(key, 0) + c1 * c2
    return {k: c for k, c in out.items() if c != 0}


def _ep_add(p, q, sign=1):
    out = dict(p)
    for k, c in q.items():
        out[k] = out.get(k, 0) + sign * c
    return {k: c for k, c in out.items() if c != 0}


def _lower_gamma_ep(k):
    """gamma(k, x) = (k-1)! (1 - exp(-x) sum_{u<k} x**u / u!) for integer k >= 1."""
    f = math.factorial(k - 1)
    out = {(0, 0): Fraction(f)}
    for u in range(k):
        out[(1, u)] = -Fraction(f, math.factorial(u))
    return out


def _det_ep(matrix):
    """Determinant by Laplace expansion along the first row, memoised on columns."""
    size = len(matrix)

    @lru_cache(maxsize=None)
    def minor(row, cols):
        if row == size:
            return {(0, 0): Fraction(1)}
        acc = {}
        for pos, col in enumerate(cols):
            rest = cols[:pos] + cols[pos + 1:]
            term = _ep_mul(matrix[row][col], minor(row + 1, rest))
            acc = _ep_add(acc, term, -1 if pos % 2 else 1)
        return acc

    return minor(0, tuple(range(size)))


def _ep_derivative(p):
    out = {}
    for (s, t), c in p.items():
        if t > 0:
            out[(s, t - 1)] = out.get((s, t - 1), 0) + c * t
        if s > 0:
            out[(s, t)] = out.get((s, t), 0) - c * s
    return {k: c for k, c in out.items() if c != 0}


@dataclass(frozen=True)
class GainPdfCoefficients:
    """Density norm * sum a * zeta**t * exp(-s zeta) of the serving gain."""

    m: int
    n: int
    norm: float
    terms: tuple  # of (s, t, a)

    def to_json(self):
        return json.dumps(
            {"m": self.m, "n": self.n, "norm": self.norm, "terms": [list(x) for x in self.terms]}
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["m"], d["n"], d["norm"], tuple((int(s), int(t), float(a)) for s, t, a in d["terms"]))

    @property
    def arrays(self):
        s = np.array([x[0] for x in self.terms], dtype=int)
        t = np.array([x[1] for x in self.terms], dtype=int)
        a = np.array([x[2] for x in self.terms], dtype=float)
        return s, t, a


_MAX_EXACT = 2**53


@lru_cache(maxsize=64)
def _gain_pdf_coeffs(m, n):
    mat = [[_lower_gamma_ep(n - m + i + j + 1) for j in range(m)] for i in range(m)]
    cdf = _det_ep(mat)
    dens = _ep_derivative(cdf)
    if any(s == 0 for s, _ in dens):
        raise ArithmeticError("density expansion left non-decaying terms")
    lcm = 1
    for c in dens.values():
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    ints = {k: int(c * lcm) for k, c in dens.items()}
    if max(abs(a) for a in ints.values()) > _MAX_EXACT:
        raise RangeError(f"coefficients for m={m}, n={n} exceed exact float range")
    mass = sum(Fraction(a * math.factorial(t), s ** (t + 1)) for (s, t), a in ints.items())
    norm = 1 / mass
    terms = tuple((s, t, float(a)) for (s, t), a in sorted(ints.items()))
    return GainPdfCoefficients(m, n, float(norm), terms)


def gain_pdf_coeffs(n_t, n_r):
    """Coefficients of the serving-gain density for ``n_t`` x ``n_r`` MRT/MRC."""
    if n_t < 1 or n_r < 1:
        raise ValueError("antenna counts must be >= 1")
    return _gain_pdf_coeffs(min(n_t, n_r), max(n_t, n_r))


def gain_pdf(coeffs: GainPdfCoefficients, zeta):
    z = np.asarray(zeta, dtype=float)
    s, t, a = coeffs.arrays
    zz = z[..., None]
    out = coeffs.norm * np.sum(a * zz**t * np.exp(-s * zz), axis=-1)
    return float(out) if out.ndim == 0 else out


def gain_cdf(coeffs: GainPdfCoefficients, zeta):
    """CDF of the serving gain from the closed-form term integrals."""
    z = np.asarray(zeta, dtype=float)
    s, t, a = coeffs.arrays
    full = np.array([math.factorial(int(k)) for k in t], dtype=float) / s ** (t + 1.0)
    out = coeffs.norm * np.sum(a * full * gammainc(t + 1.0, s * z[..., None]), axis=-1)
    return float(out) if out.ndim == 0 else out


def gain_cf(coeffs: GainPdfCoefficients, omega):
    """Characteristic function E[exp(j omega g)] of the serving gain."""
    w = np.asarray(omega, dtype=float)
    s, t, a = coeffs.arrays
    fac = np.array([math.factorial(int(k)) for k in t], dtype=float)
    out = coeffs.norm * np.sum(a * fac / (s - 1j * w[..., None]) ** (t + 1.0), axis=-1)
    return complex(out) if out.ndim == 0 else out


def gain_mean(coeffs: GainPdfCoefficients):
    s, t, a = coeffs.arrays
    fac = np.array([math.factorial(int(k) + 1) for k in t], dtype=float)
    return float(coeffs.norm * np.sum(a * fac / s ** (t + 2.0)))


def gain_mass(coeffs: GainPdfCoefficients):
    s, t, a = coeffs.arrays
    fac = np.array([math.factorial(int(k)) for k in t], dtype=float)
    return float(coeffs.norm * np.sum(a * fac / s ** (t + 1.0)))
