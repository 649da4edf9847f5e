"""Rate-energy analysis of indoor MIMO SWIPT networks with wall blockage.

Power heads form a Poisson point process on a disk, walls a Manhattan
Poisson line process. The package evaluates the joint CCDF of rate and
harvested power analytically, checks it by Monte Carlo simulation and
turns it into rate-energy trade-off curves.
"""

from .params import SystemParams, dbm_to_watt, watt_to_dbm
from .analysis import DEFAULT_POLICY, QuadControls, TruncationPolicy

__all__ = ["SystemParams", "dbm_to_watt", "watt_to_dbm", "DEFAULT_POLICY", "QuadControls", "TruncationPolicy"]
