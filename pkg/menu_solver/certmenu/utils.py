import math
import os
import logging
from dataclasses import dataclass, replace, asdict

import numpy as np

from certmenu.errors import NumericError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """
    Numerical tolerances shared by every operation.
    Args:
        compare: float. Slack for inequality checks (validators, monotonicity, revenue regressions).
        quad: float. Absolute and relative target handed to the quadrature routine.
        quad_fail: float. Reported quadrature error above which the estimate is rejected.
        root: float. Absolute bracket width at which bisection on types stops.
        max_bisect: int. Iteration cap for bisection.
        probe_seed: int. Seed of the random probe types used for cross-checks.
        n_probes: int. Number of probe types.
        probe_tol: float. Utility slack when probes are compared against a segmentation.
    """
    compare: float = 1e-9
    quad: float = 1e-8
    quad_fail: float = 1e-6
    root: float = 1e-10
    max_bisect: int = 200
    probe_seed: int = 42
    n_probes: int = 64
    probe_tol: float = 1e-7

    def with_overrides(self, **overrides):
        overrides = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **overrides)

    def to_dict(self):
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def first_true(predicate, lo, hi, tol=DEFAULT_TOLERANCES):
    """
    Bisection for the infimum of a monotone predicate, vectorized over brackets.
    Args:
        predicate: callable mapping an array of points to a boolean array. Must be
                   False-then-True along each bracket.
        lo: array. Points where the predicate is False.
        hi: array. Points where the predicate is True.
        tol: Tolerances.
    Returns:
        hi: array of points where the predicate holds, within tol.root of the infimum.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    for _ in range(tol.max_bisect):
        if np.all(hi - lo <= tol.root):
            return hi
        mid = 0.5 * (lo + hi)
        ok = np.asarray(predicate(mid), dtype=bool)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    if np.all(hi - lo <= tol.root):
        return hi
    raise NumericError("Bisection did not reach the root tolerance after {} iterations".format(tol.max_bisect),
                       estimate=hi, width=float(np.max(hi - lo)))


def geometric_grid(eps, q_max):
    """
    Quality levels eps * (1 + eps) ** l, l = 0, 1, ..., not exceeding q_max.
    """
    if eps <= 0 or eps >= 1:
        raise DomainError("eps must lie in (0, 1), got {}".format(eps))
    if q_max < eps:
        return np.zeros(0)
    top = int(math.floor(math.log(q_max / eps) / math.log1p(eps) + 1e-12))
    grid = eps * (1.0 + eps) ** np.arange(top + 1)
    return grid[grid <= q_max * (1 + 1e-12)]


def floor_to_geometric(q, eps):
    """
    Round quality q >= eps down to the nearest eps * (1 + eps) ** l.
    """
    level = math.floor(math.log(q / eps) / math.log1p(eps) + 1e-12)
    rounded = eps * (1.0 + eps) ** level
    # guard against the log landing one level too high
    if rounded > q * (1 + 1e-12):
        rounded = eps * (1.0 + eps) ** (level - 1)
    return rounded


def configure_threads(threads=None):
    """
    Set the numba worker count from the argument or the CERTMENU_THREADS variable.
    """
    import numba as nb

    if threads is None:
        env = os.environ.get("CERTMENU_THREADS")
        threads = int(env) if env else None
    if threads:
        threads = max(1, min(int(threads), nb.config.NUMBA_NUM_THREADS))
        nb.set_num_threads(threads)
        logger.debug("numba threads set to %d", threads)
    return nb.get_num_threads()
