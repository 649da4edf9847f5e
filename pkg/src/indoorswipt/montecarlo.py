"""Monte Carlo simulation of the instantaneous rate and harvested power.

One replication draws a wall grid, a PPP of power heads on the disk, the
walls between every head and the receiver, exponential fading for the
interferers and the MRT/MRC gain for the serving head. The serving head is
the one with the smallest path loss; only heads with a strictly larger path
loss contribute interference.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from .channel import path_loss, sample_fading, sample_mimo_gain
from .errors import InsufficientSamplesError
from .geometry import PhRealization, WallRealization, place_phs, sample_phs, sample_walls
from .params import SystemParams

MIN_JCCDF_REPS = 100
MIN_BIN_SAMPLES = 500


@dataclass(frozen=True)
class Replication:
    """One joint realization and the resulting (R, Q).

    ``serving_index`` is -1 and ``l0`` is infinite when the disk holds no
    power head; such a replication has ``rate = q_harv = 0``.
    """

    walls: WallRealization
    phs: PhRealization
    serving_index: int
    l0: float
    g0: float
    i_mu: float
    rate: float
    q_harv: float

    @property
    def void(self):
        return self.serving_index < 0

    def to_dict(self):
        return {
            "walls": self.walls.to_dict(),
            "phs": self.phs.to_dict(),
            "serving_index": self.serving_index,
            "l0": None if math.isinf(self.l0) else self.l0,
            "g0": self.g0,
            "i_mu": self.i_mu,
            "rate": self.rate,
            "q_harv": self.q_harv,
        }

    @classmethod
    def from_dict(cls, d):
        walls = WallRealization(np.asarray(d["walls"]["x_walls"], float), np.asarray(d["walls"]["y_walls"], float))
        p = d["phs"]
        phs = PhRealization(np.asarray(p["r"], float), np.asarray(p["theta"], float), np.asarray(p["n_walls"], int))
        l0 = math.inf if d["l0"] is None else float(d["l0"])
        return cls(walls, phs, int(d["serving_index"]), l0, float(d["g0"]), float(d["i_mu"]),
                   float(d["rate"]), float(d["q_harv"]))


def rate_and_power(params: SystemParams, g0, l0, i_mu):
    """Instantaneous rate (bit/s) and harvested power (W).

    R = B_c log2(1 + (P g0 / l0) / (P i_mu + sigma*^2)) and
    Q = rho xi P (g0 / l0 + i_mu).
    """
    p = params.p_tx
    signal = p * g0 / l0
    rate = params.b_c * np.log2(1.0 + signal / (p * i_mu + params.sigma_star2))
    q = params.rho * params.xi * p * (g0 / l0 + i_mu)
    return rate, q


def assemble_replication(params: SystemParams, walls, phs, g0, fading):
    """Build a Replication from given geometry, serving gain and interferer fading.

    ``fading`` holds one gain per head; the serving head's entry is ignored.
    """
    if len(phs) == 0:
        return Replication(walls, phs, -1, math.inf, 0.0, 0.0, 0.0, 0.0)
    loss = np.atleast_1d(path_loss(params, phs.r, phs.n_walls))
    k = int(np.argmin(loss))  # first index on ties
    l0 = float(loss[k])
    interf = loss > l0
    i_mu = float(np.sum(np.asarray(fading)[interf] / loss[interf]))
    rate, q = rate_and_power(params, g0, l0, i_mu)
    return Replication(walls, phs, k, l0, float(g0), i_mu, float(rate), float(q))


def run_replication(params: SystemParams, rng):
    walls = sample_walls(params, rng)
    r, theta = sample_phs(params, rng)
    phs = place_phs(walls, r, theta)
    if len(phs) == 0:
        return assemble_replication(params, walls, phs, 0.0, np.zeros(0))
    fading = sample_fading(rng, len(phs))
    g0 = sample_mimo_gain(params.n_t, params.n_r, rng)
    return assemble_replication(params, walls, phs, g0, fading)


def simulate(params: SystemParams, n_reps, rng):
    """List of ``n_reps`` independent replications drawn sequentially from ``rng``."""
    return [run_replication(params, rng) for _ in range(int(n_reps))]


@dataclass(frozen=True)
class Samples:
    """Per-replication scalars in array form."""

    l0: np.ndarray
    g0: np.ndarray
    i_mu: np.ndarray
    rate: np.ndarray
    q_harv: np.ndarray

    def __len__(self):
        return len(self.l0)

    @classmethod
    def from_replications(cls, reps):
        cols = np.array([(r.l0, r.g0, r.i_mu, r.rate, r.q_harv) for r in reps], dtype=float).reshape(-1, 5)
        return cls(*cols.T)


def sample_arrays(params: SystemParams, n_reps, rng):
    return Samples.from_replications(simulate(params, n_reps, rng))


def jccdf_from_samples(samples: Samples, r_star, q_star):
    """Fraction with R >= r_star and Q >= q_star plus the 95% half-width.

    ``r_star`` and ``q_star`` broadcast against each other.
    """
    n = len(samples)
    if n < MIN_JCCDF_REPS:
        raise InsufficientSamplesError(f"need at least {MIN_JCCDF_REPS} replications, got {n}")
    r = np.asarray(r_star, dtype=float)
    q = np.asarray(q_star, dtype=float)
    hits = (samples.rate >= r[..., None]) & (samples.q_harv >= q[..., None])
    p_hat = np.count_nonzero(hits, axis=-1) / n
    half = 1.96 * np.sqrt(p_hat * (1.0 - p_hat) / n)
    if p_hat.ndim == 0:
        return float(p_hat), float(half)
    return p_hat, half


def estimate_jccdf(params: SystemParams, r_star, q_star, n_reps, rng):
    """Monte Carlo estimate of P(R >= r_star, Q >= q_star) and its 95% half-width."""
    if n_reps < MIN_JCCDF_REPS:
        raise InsufficientSamplesError(f"need at least {MIN_JCCDF_REPS} replications, got {n_reps}")
    return jccdf_from_samples(sample_arrays(params, n_reps, rng), r_star, q_star)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous empirical CDF; ``x`` sorted, ``f[i] = F(x[i])``."""

    x: np.ndarray
    f: np.ndarray
    n: int

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.x, t, side="right")
        out = np.where(k > 0, self.f[np.maximum(k - 1, 0)], 0.0)
        return float(out) if out.ndim == 0 else out


def _ecdf(values, n_total):
    v = np.sort(np.asarray(values, dtype=float))
    v = v[np.isfinite(v)]
    x, counts = np.unique(v, return_counts=True)
    return StepFunction(x, np.cumsum(counts) / n_total, n_total)


def empirical_min_loss_cdf(params: SystemParams, n_reps, rng):
    """Empirical CDF of the serving path loss; void replications count as l0 = inf."""
    s = sample_arrays(params, n_reps, rng)
    return _ecdf(s.l0, len(s))


def stratified_interference_cdf(params: SystemParams, l0_bin, n_reps, rng):
    """Empirical CDF of i_mu over replications whose l0 lies in ``[low, high)``."""
    low, high = l0_bin
    s = sample_arrays(params, n_reps, rng)
    inside = (s.l0 >= low) & (s.l0 < high)
    count = int(np.count_nonzero(inside))
    if count < MIN_BIN_SAMPLES:
        raise InsufficientSamplesError(
            f"only {count} replications fell in the l0 bin [{low:g}, {high:g}); "
            f"at least {MIN_BIN_SAMPLES} are needed, widen the bin or raise n_reps"
        )
    return _ecdf(s.i_mu[inside], count)


def write_jsonl(replications, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rep in replications:
            fh.write(json.dumps(rep.to_dict()) + "\n")


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [Replication.from_dict(json.loads(line)) for line in fh if line.strip()]
