"""
Exhaustive search over small discrete menu spaces, used as ground truth for the
dynamic programs.
"""

import math
import logging
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np
from tqdm import tqdm

from certmenu.errors import DomainError, ResourceError
from certmenu.model import normalize_menu

logger = logging.getLogger(__name__)

OBJECTIVES = ("revenue", "welfare")
DEFAULT_BUDGET = 10 ** 7


@dataclass(frozen=True)
class DiscreteInstance:
    """
    Finite type model with the menu grids it is evaluated on.

    Attributes:
        thetas: increasing type atoms.
        masses: probability of each atom.
        qualities: quality grid.
        prices: price grid.
        v_table: value of each grid quality for each atom, shape (len(qualities), len(thetas)).
        c: verification cost per non-trivial sale.
    """
    thetas: np.ndarray
    masses: np.ndarray
    qualities: np.ndarray
    prices: np.ndarray
    v_table: np.ndarray
    c: float = 0.0

    def items(self, objective="revenue"):
        """
        Candidate non-trivial items sorted by (quality, price), restricted to those some
        atom weakly prefers to the trivial item. Welfare menus price every item at c.
        Returns:
            item_q: int array of quality indices.
            item_p: float array of prices.
        """
        _check_objective(objective)
        positive = np.flatnonzero(self.qualities > 0)
        prices = np.array([self.c]) if objective == "welfare" else np.unique(self.prices)
        item_q = np.repeat(positive, len(prices))
        item_p = np.tile(prices, len(positive))
        wanted = self.v_table[item_q, -1] - item_p >= 0
        return item_q[wanted].astype(np.int32), item_p[wanted].astype(float)


def _check_objective(objective):
    if objective not in OBJECTIVES:
        raise DomainError("Objective must be one of {}, got '{}'".format(OBJECTIVES, objective))


def discretize_types(inst, n, qualities=(), prices=()):
    """
    Quantile-stratified type atoms theta_j = quantile((j - 0.5) / n), each with mass 1/n.
    Args:
        inst: PricingInstance.
        n: int >= 1. Number of atoms.
        qualities: quality grid to tabulate values on.
        prices: price grid carried along for the search.
    Returns:
        di: DiscreteInstance.
    """
    if n < 1:
        raise DomainError("Need at least one type atom, got {}".format(n))
    thetas = np.asarray(inst.dist.quantile((np.arange(1, n + 1) - 0.5) / n), dtype=float)
    masses = np.full(n, 1.0 / n)
    qualities = np.unique(np.asarray(qualities, dtype=float))
    v_table = inst.v.grid(qualities, thetas) if len(qualities) else np.zeros((0, n))
    return DiscreteInstance(thetas, masses, qualities, np.asarray(prices, dtype=float), v_table, float(inst.c))


def count_menus(num_items, k):
    return sum(math.comb(num_items, m) for m in range(min(k, num_items) + 1))


def brute_force_optimal(di, k, objective="revenue", budget=DEFAULT_BUDGET, batch=4096, progress=False):
    """
    Best menu of at most k non-trivial items from the grids of di, by exact
    expectation over the atoms. Buyers break ties toward the higher quality.
    Args:
        di: DiscreteInstance.
        k: int >= 0. Item limit.
        objective: "revenue" or "welfare" (welfare prices every item at c).
        budget: int. Largest number of candidate menus to enumerate.
        batch: int. Menus evaluated per vectorized step.
        progress: bool. Show a progress bar.
    Returns:
        menu: Menu, the first maximizer in enumeration order.
        value: float.
    """
    _check_objective(objective)
    item_q, item_p = di.items(objective)
    num_items = len(item_q)
    required = count_menus(num_items, k)
    if required > budget:
        raise ResourceError("Enumeration needs {} menus, budget is {}".format(required, budget),
                            required=required, budget=budget)

    utility = di.v_table[item_q] - item_p[:, None]
    if objective == "revenue":
        payoff = np.broadcast_to((item_p - di.c)[:, None], utility.shape)
    else:
        payoff = di.v_table[item_q] - di.c
    logger.debug("Enumerating %d menus over %d items", required, num_items)

    best_value, best_combo = 0.0, ()
    bar = tqdm(total=required, disable=not progress, desc="oracle")
    bar.update(1)
    for size in range(1, min(k, num_items) + 1):
        combos = combinations(range(num_items), size)
        while True:
            chunk = np.array(list(islice(combos, batch)), dtype=np.int64)
            if len(chunk) == 0:
                break
            bar.update(len(chunk))
            # position 0 is the trivial item; reversed argmax picks the highest quality among ties
            u = np.concatenate([np.zeros((len(chunk), 1, utility.shape[1])), utility[chunk]], axis=1)
            w = np.concatenate([np.zeros((len(chunk), 1, utility.shape[1])), payoff[chunk]], axis=1)
            choice = size - np.argmax(u[:, ::-1, :], axis=1)
            gained = np.take_along_axis(w, choice[:, None, :], axis=1)[:, 0, :]
            values = gained @ di.masses
            top = int(np.argmax(values))
            if values[top] > best_value:
                best_value, best_combo = float(values[top]), tuple(chunk[top])
    bar.close()

    menu = normalize_menu([(di.qualities[item_q[i]], item_p[i]) for i in best_combo])
    return menu, best_value
