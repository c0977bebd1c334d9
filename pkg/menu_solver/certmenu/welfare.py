"""
Welfare-optimal menus: every quality offered at cost, and the best menu of at
most k at-cost quality levels.
"""

import math
import logging
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from certmenu.choice import segment_outcome
from certmenu.errors import ConsistencyError, DomainError
from certmenu.fptas import DEFAULT_MEMORY_CAP_MB, DEFAULT_TYPES, solve_discrete
from certmenu.model import expect, normalize_menu
from certmenu.oracle import discretize_types
from certmenu.utils import DEFAULT_TOLERANCES

logger = logging.getLogger(__name__)


def welfare_optimal_dense(inst, n_grid=100, tol=DEFAULT_TOLERANCES):
    """
    Menu offering q_max * j / n_grid, j = 1..n_grid, at price c.
    Returns:
        menu: Menu.
        welfare: float.
    """
    if n_grid < 2:
        raise DomainError("n_grid must be at least 2, got {}".format(n_grid))
    qualities = inst.q_max * np.arange(1, n_grid + 1) / n_grid
    menu = normalize_menu([(q, inst.c) for q in qualities], inst.q_max)
    outcome = segment_outcome(inst, menu, tol)
    logger.debug("Dense at-cost menu with %d levels: welfare %.6f", n_grid, outcome.welfare)
    return menu, outcome.welfare


def welfare_dp(inst, eps, k, n_types=DEFAULT_TYPES, memory_cap_mb=DEFAULT_MEMORY_CAP_MB,
               tol=DEFAULT_TOLERANCES, progress=False):
    """
    Best menu of at most k at-cost levels on the multiples of eps.
    Args:
        inst: PricingInstance.
        eps: float in (0, 1).
        k: int >= 1.
        n_types: int. Atoms of the discrete type model.
        memory_cap_mb: float.
        tol: Tolerances.
        progress: bool.
    Returns:
        menu: Menu with every non-trivial price equal to c.
        tables: DpTables with welfare-valued cells.
    """
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1), got {}".format(eps))
    if k < 1:
        raise DomainError("k must be at least 1, got {}".format(k))
    count = int(math.floor(inst.q_max / eps + 1e-9))
    qualities = np.concatenate([[0.0], eps * np.arange(1, count + 1)])
    di = discretize_types(inst, n_types, qualities, [inst.c])
    logger.info("Welfare grid: %d levels at price %.6g", count, inst.c)
    solution = solve_discrete(di, k, "welfare", memory_cap_mb, progress)

    outcome = segment_outcome(inst, solution.menu, tol)
    if abs(outcome.revenue) > tol.compare * max(1.0, inst.c):
        raise ConsistencyError("At-cost menu earns revenue {}".format(outcome.revenue), revenue=outcome.revenue)
    logger.info("Welfare DP value %.6f, exact welfare %.6f with %d levels", solution.value, outcome.welfare,
                len(solution.menu) - 1)
    return solution.menu, solution.tables


def wel_minus_rev(inst, menu, tol=DEFAULT_TOLERANCES):
    """Gains from trade left to the buyer side: welfare minus certifier revenue."""
    return segment_outcome(inst, menu, tol).buyer_surplus


def first_best_welfare(inst, tol=DEFAULT_TOLERANCES):
    """
    E[max(0, max_q v(q; theta) - c)], the per-type peak found by bounded
    golden-section search (v is concave in q).
    """
    @lru_cache(maxsize=None)
    def peak(theta):
        found = minimize_scalar(lambda q: -float(inst.v(q, theta)), bounds=(0.0, inst.q_max),
                                method="bounded", options={"xatol": tol.root})
        best = max(-found.fun, float(inst.v(inst.q_max, theta)), 0.0)
        return max(best - inst.c, 0.0)

    return expect(inst.dist, lambda theta: peak(float(theta)), tol=tol)
