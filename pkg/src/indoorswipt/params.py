"""Physical and network constants of the indoor SWIPT scenario."""

from dataclasses import dataclass, asdict, fields, replace
import math

SPEED_OF_LIGHT = 299_792_458.0


def dbm_to_watt(dbm):
    return 10.0 ** (dbm / 10.0) * 1e-3


def watt_to_dbm(watt):
    return 10.0 * math.log10(watt) + 30.0


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def density_from_spacing(d_ph):
    """PH density for a half inter-PH distance ``d_ph`` (m): 1 / (pi d_ph^2)."""
    return 1.0 / (math.pi * d_ph**2)


def thermal_noise_watt(bandwidth, noise_figure_db=10.0):
    """-174 dBm/Hz + 10 log10(B) + NF, in watts."""
    return dbm_to_watt(-174.0 + 10.0 * math.log10(bandwidth) + noise_figure_db)


@dataclass(frozen=True)
class SystemParams:
    """Network, propagation and receiver constants.

    Defaults reproduce the reference indoor setup: a 60 m disk, P = 30 dBm,
    B_c = 200 kHz at 2.1 GHz, NF = 10 dB, conversion noise -70 dBm,
    xi = 0.8, beta = 2.5, rho = 0.5, n_t = 4, n_r = 2, -10 dB per wall,
    d_PH = 5 m and lambda_w = 0.05 walls/m.
    """

    lambda_ph: float = density_from_spacing(5.0)
    lambda_w: float = 0.05
    r_d: float = 60.0
    beta: float = 2.5
    f_c: float = 2.1e9
    k_pen: float = 0.1
    p_tx: float = 1.0
    b_c: float = 200e3
    sigma_n2: float = thermal_noise_watt(200e3)
    sigma_c2: float = dbm_to_watt(-70.0)
    rho: float = 0.5
    xi: float = 0.8
    n_t: int = 4
    n_r: int = 2

    def __post_init__(self):
        checks = [
            (self.lambda_ph > 0, "lambda_ph must be > 0"),
            (self.lambda_w >= 0, "lambda_w must be >= 0"),
            (self.r_d > 0, "r_d must be > 0"),
            (self.beta > 2, "beta must be > 2"),
            (self.f_c > 0, "f_c must be > 0"),
            (0 < self.k_pen < 1, "k_pen must lie in (0, 1)"),
            (self.p_tx > 0, "p_tx must be > 0"),
            (self.b_c > 0, "b_c must be > 0"),
            (self.sigma_n2 > 0, "sigma_n2 must be > 0"),
            (self.sigma_c2 > 0, "sigma_c2 must be > 0"),
            (0 < self.rho < 1, "rho must lie strictly inside (0, 1)"),
            (0 < self.xi <= 1, "xi must lie in (0, 1]"),
            (int(self.n_t) == self.n_t and self.n_t >= 1, "n_t must be a positive integer"),
            (int(self.n_r) == self.n_r and self.n_r >= 1, "n_r must be a positive integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    @property
    def kappa(self):
        """Path-loss constant (4 pi f_c / c0)^2."""
        return (4.0 * math.pi * self.f_c / SPEED_OF_LIGHT) ** 2

    @property
    def sigma_star2(self):
        """Effective noise at the decoder: sigma_n^2 + sigma_c^2 / (1 - rho)."""
        return self.sigma_n2 + self.sigma_c2 / (1.0 - self.rho)

    @property
    def mean_ph_count(self):
        return self.lambda_ph * math.pi * self.r_d**2

    def with_spacing(self, d_ph):
        return replace(self, lambda_ph=density_from_spacing(d_ph))

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]
