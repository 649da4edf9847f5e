"""Random walls (Manhattan Poisson line process) and power-head placement.

The receiver sits at the origin. Walls are infinite lines parallel to the
axes whose crossing points with the x- and y-axis form two independent
1-D Poisson processes of intensity ``lambda_w`` per metre. A power head at
(x, y) is separated from the origin by the walls lying strictly between 0
and x on the x-axis plus those strictly between 0 and y on the y-axis.
"""

from dataclasses import dataclass
import math

import numpy as np

from .params import SystemParams


@dataclass(frozen=True)
class WallRealization:
    """Sorted wall coordinates on both axes (metres)."""

    x_walls: np.ndarray
    y_walls: np.ndarray

    def to_dict(self):
        return {"x_walls": self.x_walls.tolist(), "y_walls": self.y_walls.tolist()}


@dataclass(frozen=True)
class PhRealization:
    """Power-head polar coordinates and per-head wall crossing counts."""

    r: np.ndarray
    theta: np.ndarray
    n_walls: np.ndarray

    def __len__(self):
        return len(self.r)

    @property
    def x(self):
        return self.r * np.cos(self.theta)

    @property
    def y(self):
        return self.r * np.sin(self.theta)

    def to_dict(self):
        return {
            "r": self.r.tolist(),
            "theta": self.theta.tolist(),
            "n_walls": self.n_walls.tolist(),
        }


def sample_walls(params: SystemParams, rng, margin=0.0):
    """Draw one wall grid over [-r_d - margin, r_d + margin] on each axis."""
    half = params.r_d + margin
    length = 2.0 * half
    nx = rng.poisson(params.lambda_w * length)
    ny = rng.poisson(params.lambda_w * length)
    xs = np.sort(rng.uniform(-half, half, nx))
    ys = np.sort(rng.uniform(-half, half, ny))
    return WallRealization(xs, ys)


def sample_phs(params: SystemParams, rng):
    """Draw PH positions of a homogeneous PPP on the disk; returns (r, theta)."""
    n = rng.poisson(params.mean_ph_count)
    r = params.r_d * np.sqrt(rng.uniform(size=n))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return r, theta


def _axis_crossings(walls, c):
    # walls strictly between 0 and c
    c = np.asarray(c, dtype=float)
    pos = np.searchsorted(walls, c, side="left") - np.searchsorted(walls, 0.0, side="right")
    neg = np.searchsorted(walls, 0.0, side="left") - np.searchsorted(walls, c, side="right")
    return np.where(c > 0, np.maximum(pos, 0), np.where(c < 0, np.maximum(neg, 0), 0))


def wall_count(walls: WallRealization, x, y):
    """Number of walls separating (x, y) from the origin (vectorised)."""
    out = _axis_crossings(walls.x_walls, x) + _axis_crossings(walls.y_walls, y)
    return int(out) if np.ndim(out) == 0 else out


def place_phs(walls: WallRealization, r, theta):
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    counts = np.asarray(wall_count(walls, r * np.cos(theta), r * np.sin(theta)), dtype=int)
    return PhRealization(r, theta, counts.reshape(r.shape))


def crossing_mean(params: SystemParams, r, theta):
    """Expected wall crossings lambda_w r (|cos| + |sin|)."""
    return params.lambda_w * r * (np.abs(np.cos(theta)) + np.abs(np.sin(theta)))


def blockage_prob(params: SystemParams, n, r, theta):
    """Probability that a PH at (r, theta) is behind exactly ``n`` walls."""
    mu = crossing_mean(params, r, theta)
    if n == 0:
        return np.exp(-mu)
    with np.errstate(divide="ignore"):
        logp = n * np.log(mu) - mu - math.lgamma(n + 1)
    return np.where(mu > 0, np.exp(logp), 0.0)


def thinned_intensity(params: SystemParams, n, r, theta):
    """Density of PHs behind ``n`` walls at (r, theta)."""
    return params.lambda_ph * blockage_prob(params, n, r, theta)
