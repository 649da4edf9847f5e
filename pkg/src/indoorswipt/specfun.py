"""Special functions with complex-argument support.

Only the families needed by the interference and path-loss analysis are
provided: the integer-order upper incomplete gamma function, the Gauss
function 2F1(1, -v; 1 - v; z) and the real family
2F1(1/2, (eta+1)/2; (eta+3)/2; 1/2).

All routines accept scalars or numpy arrays for the complex argument.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import roots_jacobi, digamma

from .errors import BranchCutError, RangeError, TruncationError

#: |z| below which 2F1(1, -v; 1-v; z) is summed directly.
SWITCH_RADIUS = 0.7

_JACOBI_NODES = 48


@dataclass(frozen=True)
class SeriesControl:
    """Truncation controls for power series."""

    rel_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_terms < 8:
            raise ValueError(f"max_terms must be >= 8, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


def _as_complex(z):
    arr = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise RangeError("non-finite complex argument")
    return arr


def _finish(arr, scalar):
    if not np.all(np.isfinite(arr)):
        raise RangeError("result overflowed the floating-point range")
    return complex(arr) if scalar else arr


def upper_gamma_int(n, z):
    """Upper incomplete gamma function Gamma(n, z) for integer ``n >= 1``.

    Uses the terminating expansion
    ``Gamma(n, z) = (n-1)! exp(-z) sum_{k<n} z**k / k!``, valid for any
    complex ``z``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"order must be a positive integer, got {n}")
    n = int(n)
    scalar = np.ndim(z) == 0
    zz = _as_complex(z)
    with np.errstate(over="ignore", invalid="ignore"):
        term = np.ones_like(zz)
        acc = np.ones_like(zz)
        for k in range(1, n):
            term = term * zz / k
            acc = acc + term
        out = math.factorial(n - 1) * np.exp(-zz) * acc
    return _finish(out, scalar)


def log_gamma(x):
    """Natural log of the gamma function for real positive ``x``."""
    return math.lgamma(x)


def hyp2f1_chi(eta, ctl=DEFAULT_CONTROL):
    """2F1(1/2, (eta+1)/2; (eta+3)/2; 1/2) by direct summation."""
    if int(eta) != eta or eta < 0:
        raise ValueError(f"eta must be a nonnegative integer, got {eta}")
    b = 0.5 * (eta + 1)
    c = 0.5 * (eta + 3)
    term = 1.0
    total = 1.0
    for k in range(ctl.max_terms):
        term *= (0.5 + k) * (b + k) / ((c + k) * (k + 1)) * 0.5
        total += term
        if term < ctl.rel_tol * total * 1e-2:
            return total
    raise TruncationError(f"hyp2f1_chi({eta}) did not converge in {ctl.max_terms} terms")


# ---------------------------------------------------------------------------
# 2F1(1, -v; 1-v; z)
#
# Work with G(z) = (1 - F(z)) / v = sum_{k>=1} z**k / (k - v), which keeps
# full relative accuracy of 1 - F near z = 0.
# ---------------------------------------------------------------------------


def _check_v(v):
    if not v > 0:
        raise ValueError(f"v must be positive, got {v}")


def _converged(term, total, tol):
    scale = np.abs(total)
    return np.all(np.abs(term) <= tol * np.where(scale > 0, scale, 1.0))


_BUCKET_EDGES = np.array([0.05, 0.2, 0.45])


def _term_count(radius, ctl, floor=2):
    """Number of terms so that radius**k has fallen far below rel_tol."""
    if radius <= 0.0:
        return floor
    k = math.ceil(math.log(ctl.rel_tol * 1e-3) / math.log(radius)) + 1
    k = max(k, floor)
    if k > ctl.max_terms:
        raise TruncationError(f"series needs {k} terms, more than max_terms={ctl.max_terms}")
    return k


def _bucketed(fn, x, ctl):
    """Apply ``fn(x_part, radius)`` over groups of similar |x| (|x| < 1)."""
    r = np.abs(x)
    groups = np.digitize(r, _BUCKET_EDGES)
    out = np.empty_like(x)
    for g in np.unique(groups):
        m = groups == g
        out[m] = fn(x[m], float(np.max(r[m])))
    return out


def _g_inside(v, z, ctl, skip=0):
    """Direct Gauss series for G, |z| <= SWITCH_RADIUS (or any |z| < 1).

    The term of index ``skip`` (if >= 1) is left out of the sum.
    """

    def run(zz, radius):
        n_terms = _term_count(radius, ctl, floor=math.ceil(v) + 3)
        power = np.array(zz, dtype=complex, copy=True)
        total = power / (1.0 - v) if skip != 1 else np.zeros_like(power)
        for k in range(2, n_terms + 1):
            power = power * zz
            if k != skip:
                total = total + power / (k - v)
        return total

    return _bucketed(run, np.asarray(z, dtype=complex), ctl)


def _power_coefficient(v):
    """Coefficient c(v) with 1 - F(z) = 1 - c(v) (-z)**v + (regular in 1/z)."""
    return math.pi * v / math.sin(math.pi * v)


def _one_minus_f_outside_regular(v, z, ctl):
    """Part of 1 - F for |z| > 1 that stays bounded: 1 + v sum z**-k / (k+v)."""

    def run(w, radius):
        n_terms = _term_count(radius, ctl)
        power = np.array(w, dtype=complex, copy=True)
        series = power / (1.0 + v)
        for k in range(2, n_terms + 1):
            power = power * w
            series = series + power / (k + v)
        return 1.0 + v * series

    return _bucketed(run, 1.0 / np.asarray(z, dtype=complex), ctl)


def _g_near_one(v, z, ctl):
    """Logarithmic expansion about z = 1 (c - a - b = 0 case), |1 - z| < 1."""
    x = 1.0 - z
    log_x = np.log(x)
    coef = 1.0  # (-v)_n / n!
    power = np.ones_like(x)
    f = coef * (digamma(1.0) - digamma(-v) - log_x)
    quiet = 0
    for n in range(1, ctl.max_terms + 1):
        coef *= (n - 1 - v) / n
        power = power * x
        term = coef * (digamma(n + 1.0) - digamma(n - v) - log_x) * power
        f = f + term
        if n > v + 1 and _converged(term, f, ctl.rel_tol):
            quiet += 1
            if quiet >= 3:
                hyp = -v * f
                return (1.0 - hyp) / v
        else:
            quiet = 0
    raise TruncationError(f"2F1 expansion about z=1 did not converge in {ctl.max_terms} terms")


@lru_cache(maxsize=256)
def _jacobi_rule(p):
    """Nodes/weights on [0, 1] for the weight t**p."""
    x, w = roots_jacobi(_JACOBI_NODES, 0.0, p)
    return 0.5 * (x + 1.0), w * 0.5 ** (p + 1.0)


def _g_integral(v, z, skip=0):
    """G via a finite sum plus a Gauss-Jacobi evaluated Euler-type integral.

    sum_{k>n0} z**k/(k-v) = z**(n0+1) * int_0^1 t**(n0-v) / (1 - z t) dt with
    n0 = ceil(v), valid for every z off [1, inf).
    """
    n0 = math.ceil(v)
    if n0 == v:
        n0 += 1
    p = n0 - v
    t, w = _jacobi_rule(round(p, 15))
    zz = np.asarray(z)[..., None]
    tail = np.sum(w / (1.0 - zz * t), axis=-1)
    head = np.zeros_like(np.asarray(z))
    power = np.ones_like(np.asarray(z))
    for k in range(1, n0 + 1):
        power = power * z
        if k != skip:
            head = head + power / (k - v)
    return head + power * z * tail


def _classify(z):
    r = np.abs(z)
    inside = r <= SWITCH_RADIUS
    outside = r >= 1.0 / SWITCH_RADIUS
    ring = ~(inside | outside)
    near_one = ring & (np.abs(1.0 - z) <= SWITCH_RADIUS)
    return inside, outside, near_one, ring & ~near_one


def one_minus_hyp2f1_split(v, z, ctl=DEFAULT_CONTROL):
    """Return ``(regular, outer)`` with 1 - F(z) = regular - c(v) (-z)**v * outer.

    ``outer`` is a boolean mask of the points evaluated with the 1/z
    continuation; elsewhere the power term is already included in
    ``regular``.  Callers that form differences of ``x**v (1 - F(j w / x))``
    can cancel the power terms exactly.
    """
    _check_v(v)
    zz = np.atleast_1d(_as_complex(z))
    on_cut = (zz.imag == 0) & (zz.real >= 1.0)
    if np.any(on_cut):
        raise BranchCutError("2F1(1,-v;1-v;z) evaluated on the branch cut [1, inf)")
    inside, outside, near_one, ring = _classify(zz)
    out = np.empty_like(zz)
    if np.any(inside):
        out[inside] = v * _g_inside(v, zz[inside], ctl)
    if np.any(outside):
        out[outside] = _one_minus_f_outside_regular(v, zz[outside], ctl)
    if np.any(near_one):
        out[near_one] = v * _g_near_one(v, zz[near_one], ctl)
    if np.any(ring):
        out[ring] = v * _g_integral(v, zz[ring])
    return out.reshape(np.shape(z)), outside.reshape(np.shape(z))


def g_series_split(v, z, ctl=DEFAULT_CONTROL):
    """Pole-separated form of G(z) = (1 - F(z)) / v for z off the real axis.

    With ``n = round(v)`` returns ``(g, outer)`` such that

    * where ``outer`` is False: ``G(z) = g + z**n / (n - v)`` (the term is
      omitted when ``n == 0``);
    * where ``outer`` is True: ``G(z) = g - pi / sin(pi v) * (-z)**v``.

    Neither ``g`` nor the separated pieces are evaluated at the pole, so
    callers can pair the singular pieces analytically when ``v`` is at or
    near an integer.  Points near z = 1 are not supported.
    """
    _check_v(v)
    n = int(round(v))
    zz = np.atleast_1d(_as_complex(z))
    inside, outside, near_one, ring = _classify(zz)
    if np.any(near_one):
        raise ValueError("g_series_split does not cover |1 - z| <= SWITCH_RADIUS")
    out = np.empty_like(zz)
    if np.any(inside):
        out[inside] = _g_inside(v, zz[inside], ctl, skip=n)
    if np.any(ring):
        out[ring] = _g_integral(v, zz[ring], skip=n)
    if np.any(outside):
        out[outside] = _one_minus_f_outside_regular(v, zz[outside], ctl) / v
    return out.reshape(np.shape(z)), outside.reshape(np.shape(z))


def one_minus_hyp2f1(v, z, ctl=DEFAULT_CONTROL):
    """1 - 2F1(1, -v; 1 - v; z) with full relative accuracy near z = 0."""
    scalar = np.ndim(z) == 0
    regular, outer = one_minus_hyp2f1_split(v, z, ctl)
    zz = np.asarray(z, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        power = np.where(outer, _power_coefficient(v) * (-zz) ** v, 0.0)
    return _finish(regular - power, scalar)


def hyp2f1_interference(v, z, ctl=DEFAULT_CONTROL):
    """Gauss hypergeometric function 2F1(1, -v; 1 - v; z).

    Parameters
    ----------
    v : float
        Positive, non-integer parameter.
    z : complex or array_like
        Argument anywhere off the cut [1, inf).
    ctl : SeriesControl
        Series truncation controls.

    Notes
    -----
    Inside ``|z| <= 0.7`` the defining series is summed. Outside ``|z| >= 1/0.7``
    the z -> 1/z connection formula
    ``F = c(v) (-z)**v - v sum_{k>=1} z**-k/(k+v)`` with
    ``c(v) = pi v / sin(pi v)`` is used. In the ring between the two, an
    Euler-type integral (Gauss-Jacobi rule) or, close to z = 1, the
    logarithmic expansion about 1 is used.
    """
    _check_v(v)
    if abs(v - round(v)) < 1e-12:
        raise ValueError("2F1(1,-v;1-v;z) has poles for integer v")
    scalar = np.ndim(z) == 0
    out = 1.0 - np.asarray(one_minus_hyp2f1(v, z, ctl))
    return _finish(out, scalar)
