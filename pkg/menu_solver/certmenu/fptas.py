"""
Revenue menus: the monotone, sparse and gridded menu transformations and the
dynamic program over (top item, lowest buyer of the top item).
"""

import math
import time
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar
from tqdm import tqdm

from certmenu import corelib
from certmenu.choice import revenue, segment_outcome, sold_menu
from certmenu.errors import ConsistencyError, DomainError, PreconditionError, ResourceError
from certmenu.model import normalize_menu
from certmenu.oracle import discretize_types
from certmenu.utils import DEFAULT_TOLERANCES, first_true, floor_to_geometric, geometric_grid

logger = logging.getLogger(__name__)

DEFAULT_TYPES = 400
DEFAULT_MEMORY_CAP_MB = 1024


def _check_eps(eps):
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1), got {}".format(eps))


@dataclass(frozen=True)
class Grids:
    """
    Attributes:
        epsilon: accuracy parameter.
        quantity_grid: {0} followed by eps * (1 + eps) ** l up to q_max.
        price_grid: multiples of price_step, from -3 * k * price_step when negative prices are on.
        price_step: eps * value_scale, or eps ** 2 * value_scale for an unlimited item count.
        value_scale: max(1, top willingness to pay).
        k: item limit the grids were built for.
    """
    epsilon: float
    quantity_grid: np.ndarray
    price_grid: np.ndarray
    price_step: float
    value_scale: float
    k: int

    def to_dict(self):
        return {"epsilon": self.epsilon, "grid_q": int(len(self.quantity_grid)),
                "grid_p": int(len(self.price_grid)), "price_step": self.price_step,
                "value_scale": self.value_scale, "k": self.k}


def build_grids(inst, eps, k=None, negative_prices=False):
    """
    Args:
        inst: PricingInstance.
        eps: float in (0, 1).
        k: int or None. None selects k = ceil(1 / eps) with the squared price step.
        negative_prices: bool. Extend the price grid down to -3k steps.
    Returns:
        grids: Grids.
    """
    _check_eps(eps)
    unlimited = k is None
    if unlimited:
        k = int(math.ceil(1.0 / eps))
    if k < 0:
        raise DomainError("k must be non-negative, got {}".format(k))
    qualities = np.concatenate([[0.0], geometric_grid(eps, inst.q_max)])
    scale = inst.value_scale(qualities)
    step = (eps * eps if unlimited else eps) * scale
    top = float(np.max(inst.v(qualities, inst.dist.support_hi)))
    highest = int(math.ceil(top / step + 1e-9)) + 1
    lowest = -3 * k if negative_prices else 0
    prices = step * np.arange(lowest, highest + 1)
    return Grids(float(eps), qualities, prices, float(step), float(scale), int(k))


@dataclass(frozen=True)
class DpTables:
    """
    Filled tables of a menu dynamic program.

    Attributes:
        items: array of shape (num_items, 2), the (quality, price) of each cell row.
        M: array of shape (k, num_items). Best value with at most k items topped by the row item.
        L: array of shape (k, num_items). Lowest type buying the top item in that best menu (nan if none).
        pred_item, pred_type: backpointers of shape (k, num_items, num_types).
        thetas, masses: the discrete type model.
        grids: Grids or None.
        objective: "revenue" or "welfare".
    """
    items: np.ndarray
    M: np.ndarray
    L: np.ndarray
    pred_item: np.ndarray
    pred_type: np.ndarray
    thetas: np.ndarray
    masses: np.ndarray
    grids: Optional[Grids] = None
    objective: str = "revenue"

    @property
    def num_layers(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class DiscreteSolution:
    value: float
    menu: object
    tables: DpTables
    transitions: int
    diagnostics: dict = field(default_factory=dict)


def _estimate_mb(layers, num_items, num_types):
    per_cell = 8 + 8 + 8 + 4  # previous and current layer, prefix maxima and their argmax
    return (layers * num_items * num_types * 8 + num_items * (num_types + 1) * per_cell) / 2 ** 20


def solve_discrete(di, k, objective="revenue", memory_cap_mb=DEFAULT_MEMORY_CAP_MB, progress=False):
    """
    Exact best menu with at most k items over the grids and atoms of di. Buyers
    break ties toward the higher quality, as in brute_force_optimal.
    Args:
        di: DiscreteInstance.
        k: int >= 0.
        objective: "revenue" or "welfare".
        memory_cap_mb: float. Refuse tables larger than this.
        progress: bool. Show a progress bar over layers.
    Returns:
        solution: DiscreteSolution.
    """
    item_q, item_p = di.items(objective)
    num_items, num_types = len(item_q), len(di.thetas)
    distinct = len(np.unique(item_q))
    layers = max(0, min(int(k), distinct, num_types))
    need = _estimate_mb(layers, num_items, num_types)
    if need > memory_cap_mb:
        raise ResourceError("Tables need about {:.0f} MB (cap {:.0f} MB); use a larger eps or fewer types"
                            .format(need, memory_cap_mb), required_mb=need, cap_mb=memory_cap_mb)

    tail = np.concatenate([np.cumsum(di.masses[::-1])[::-1], [0.0]])
    weighted = di.v_table * di.masses[None, :]
    vtail = np.concatenate([np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1],
                            np.zeros((len(di.qualities), 1))], axis=1)
    qstart = np.searchsorted(item_q, item_q, side="left").astype(np.int32)
    mode = corelib.REVENUE if objective == "revenue" else corelib.WELFARE
    vals = np.ascontiguousarray(di.v_table, dtype=np.float64)

    M = np.full((layers, num_items), -np.inf)
    L = np.full((layers, num_items), np.nan)
    pred_item = np.full((layers, num_items, num_types), -1, dtype=np.int32)
    pred_type = np.full((layers, num_items, num_types), -1, dtype=np.int32)
    best_layer = best_item = best_t = -1
    best_value = 0.0
    transitions = num_items if layers else 0

    logger.info("Filling %d layers over %d items and %d types", layers, num_items, num_types)
    prev = np.full((num_items, num_types), -np.inf)
    prefix = np.empty((num_items, num_types + 1))
    prefix_arg = np.empty((num_items, num_types + 1), dtype=np.int32)
    for layer in tqdm(range(layers), disable=not progress, desc=objective):
        cur = np.full((num_items, num_types), -np.inf)
        if layer == 0:
            corelib.single_item_layer(vals, item_q, item_p, tail, vtail, di.c, mode, cur)
        else:
            corelib.prefix_best(prev, prefix, prefix_arg)
            transitions += corelib.extend_layer(vals, item_q, item_p, qstart, tail, vtail, mode,
                                                prefix, prefix_arg, cur, pred_item[layer], pred_type[layer])
        row_best = cur.max(axis=1) if num_types else np.full(num_items, -np.inf)
        row_arg = cur.argmax(axis=1)
        earlier = M[layer - 1] if layer else np.full(num_items, -np.inf)
        improved = row_best > earlier
        M[layer] = np.where(improved, row_best, earlier)
        L[layer] = np.where(improved, np.where(np.isfinite(row_best), di.thetas[row_arg], np.nan),
                            L[layer - 1] if layer else np.nan)
        if num_items and row_best.max() > best_value:
            best_item = int(np.argmax(row_best))
            best_value, best_layer, best_t = float(row_best[best_item]), layer, int(row_arg[best_item])
        logger.debug("Layer %d: best %.6f", layer + 1, row_best.max() if num_items else -np.inf)
        if not np.isfinite(cur).any():
            M, L = M[:layer + 1], L[:layer + 1]
            pred_item, pred_type = pred_item[:layer + 1], pred_type[:layer + 1]
            break
        prev = cur

    chain = []
    if best_layer >= 0:
        chain = corelib.back_track(best_layer, best_item, best_t, pred_item, pred_type)
    menu = normalize_menu([(di.qualities[item_q[i]], item_p[i]) for i in chain])
    items = np.column_stack([di.qualities[item_q], item_p]) if num_items else np.zeros((0, 2))
    tables = DpTables(items, M, L, pred_item, pred_type, di.thetas, di.masses, objective=objective)
    return DiscreteSolution(best_value, menu, tables, int(transitions),
                            {"items": int(num_items), "types": int(num_types), "layers": int(M.shape[0]),
                             "cells": int(M.shape[0] * num_items * num_types), "transitions": int(transitions)})


def dp_solve(inst, eps, k=None, n_types=DEFAULT_TYPES, negative_prices=False,
             memory_cap_mb=DEFAULT_MEMORY_CAP_MB, tol=DEFAULT_TOLERANCES, progress=False, timing=True):
    """
    Approximately revenue-optimal menu with at most k items.
    Args:
        inst: PricingInstance.
        eps: float in (0, 1). Grid accuracy.
        k: int or None. Item limit; None means unlimited (k = ceil(1/eps), squared price step).
        n_types: int. Atoms of the discrete type model the tables are filled on.
        negative_prices: bool. Allow the discounted negative price range.
        memory_cap_mb: float.
        tol: Tolerances.
        progress: bool.
        timing: bool. Record wall time in the diagnostics.
    Returns:
        menu: Menu, monotone.
        tables: DpTables.
        diagnostics: dict.
    """
    started = time.perf_counter()
    grids = build_grids(inst, eps, k, negative_prices)
    di = discretize_types(inst, n_types, grids.quantity_grid, grids.price_grid)
    logger.info("Revenue grids: %d qualities x %d prices, step %.6g", len(grids.quantity_grid),
                len(grids.price_grid), grids.price_step)
    solution = solve_discrete(di, grids.k, "revenue", memory_cap_mb, progress)

    menu = solution.menu
    if not menu.is_monotone():
        logger.debug("Reconstructed menu has a price descent; pruning")
        menu = monotone_prune(inst, menu, tol)
    if not menu.is_monotone():
        raise ConsistencyError("Reconstructed menu is not monotone", menu=menu.to_list())
    if inst.c >= 0 and np.any(menu.prices < 0):
        raise ConsistencyError("Menu selects a negative price with non-negative cost", menu=menu.to_list())

    exact = segment_outcome(inst, menu, tol).revenue
    diagnostics = dict(solution.diagnostics)
    diagnostics.update({"grid_q": int(len(grids.quantity_grid)), "grid_p": int(len(grids.price_grid)),
                        "revenue_dp": solution.value, "revenue_exact": exact})
    if timing:
        diagnostics["wall_ms"] = 1000.0 * (time.perf_counter() - started)
    logger.info("DP revenue %.6f, exact revenue %.6f with %d items", solution.value, exact, len(menu) - 1)
    tables = DpTables(solution.tables.items, solution.tables.M, solution.tables.L, solution.tables.pred_item,
                      solution.tables.pred_type, di.thetas, di.masses, grids, "revenue")
    return menu, tables, diagnostics


def monotone_prune(inst, menu, tol=DEFAULT_TOLERANCES):
    """
    Remove price descents without losing revenue. Items nobody buys go first; then,
    while prices fall somewhere, either every item above the highest item priced
    over all later ones is dropped, or the block between the first descent's left
    item and the next item priced at least as high is dropped.
    """
    before = revenue(inst, menu, tol)
    work = sold_menu(inst, menu, tol)
    while not work.is_monotone():
        prices = work.prices
        later = np.maximum.accumulate(prices[::-1])[::-1]
        above = [i for i in range(len(prices) - 1) if prices[i] > later[i + 1]]
        if above:
            top = max(above)
            work = work.without(range(top + 1, len(work)))
            continue
        descent = int(np.flatnonzero(np.diff(prices) < 0)[0]) + 1
        left = descent - 1
        right = descent + int(np.flatnonzero(prices[descent:] >= prices[left])[0])
        work = work.without(range(left + 1, right))
    # dropping a block can strand an item nobody buys any more
    work = sold_menu(inst, work, tol)
    after = revenue(inst, work, tol)
    if after < before - tol.compare:
        raise ConsistencyError("Monotone pruning lost revenue: {} -> {}".format(before, after),
                               before=before, after=after)
    return work


def sparsify(inst, menu, eps, tol=DEFAULT_TOLERANCES):
    """
    Keep, for each price level a = l * eps * s below the top price, the cheapest
    item priced at least a (s is the instance value scale).
    """
    _check_eps(eps)
    if not menu.is_monotone():
        raise PreconditionError("sparsify needs a menu with non-decreasing prices")
    before = revenue(inst, menu, tol)
    work = sold_menu(inst, menu, tol)
    step = eps * inst.value_scale(np.union1d(np.linspace(0.0, inst.q_max, 257), work.qualities))
    prices = work.prices[1:]
    keep = {0}
    if len(prices):
        levels = max(1, int(math.ceil(prices.max() / step - 1e-12)))
        for level in range(levels):
            affordable = np.flatnonzero(prices >= level * step)
            if len(affordable):
                keep.add(int(affordable[np.argmin(prices[affordable])]) + 1)
    out = work.without(set(range(len(work))) - keep)
    after = revenue(inst, out, tol)
    if after < before - step - 1e-6:
        raise ConsistencyError("Sparsification lost more than one price step: {} -> {}".format(before, after),
                               before=before, after=after)
    logger.debug("Sparsified %d items to %d", len(menu), len(out))
    return out


def discretize_menu(inst, menu, eps):
    """
    Round a monotone menu onto the grids: qualities below eps are dropped, the rest
    rounded down to eps * (1 + eps) ** l; prices scaled with the quality, rounded
    down to the price step and discounted by 3 * i steps for the i-th item.
    """
    _check_eps(eps)
    if not menu.is_monotone():
        raise PreconditionError("discretize_menu needs a menu with non-decreasing prices")
    step = eps * inst.value_scale()
    rounded = []
    position = 0
    for q, p in menu.items[1:]:
        if q < eps:
            continue
        position += 1
        q_new = floor_to_geometric(q, eps)
        scaled = p * q_new / q
        floored = math.floor(scaled / step + 1e-9) * step
        rounded.append((q_new, floored - 3 * position * step))
    return normalize_menu(rounded, inst.q_max)


def _is_linear(inst, n_grid=20, tol=DEFAULT_TOLERANCES):
    qualities = np.linspace(0.0, inst.q_max, n_grid)
    thetas = np.linspace(*inst.support, n_grid)
    table = inst.v.grid(qualities, thetas)
    scaled = (qualities / inst.q_max)[:, None] * table[-1][None, :]
    return bool(np.all(np.abs(table - scaled) <= tol.compare * np.maximum(1.0, np.abs(table))))


def linear_single_item(inst, n_grid=2001, tol=DEFAULT_TOLERANCES):
    """
    Revenue-optimal posted price for the full quantity when values are linear in
    quantity. Grid search over prices, golden-section refinement, ties to the
    highest price.
    """
    if not _is_linear(inst, tol=tol):
        raise PreconditionError("linear_single_item needs v(q; theta) linear in q")
    lo, hi = inst.support
    w_lo = float(inst.v(inst.q_max, lo))
    w_hi = float(inst.v(inst.q_max, hi))

    def payoff(prices):
        prices = np.atleast_1d(np.asarray(prices, dtype=float))
        cut = np.full(prices.shape, lo)
        inside = (prices > w_lo) & (prices <= w_hi)
        if inside.any():
            cut[inside] = first_true(lambda t: inst.v(inst.q_max, t) >= prices[inside],
                                     np.full(inside.sum(), lo), np.full(inside.sum(), hi), tol)
        share = np.where(prices > w_hi, 0.0, inst.dist.survival(cut))
        return (prices - inst.c) * share

    grid = np.linspace(max(min(w_lo, w_hi), 0.0), w_hi, n_grid)
    values = payoff(grid)
    g = int(np.argmax(values))
    bracket = (grid[max(g - 1, 0)], grid[min(g + 1, n_grid - 1)])
    candidates = list(grid)
    if bracket[1] > bracket[0]:
        refined = minimize_scalar(lambda p: -payoff(p)[0], bounds=bracket, method="bounded",
                                  options={"xatol": tol.root})
        candidates.append(float(refined.x))
        values = np.append(values, payoff(refined.x)[0])
    candidates = np.array(candidates)
    best = values.max()
    if best <= tol.compare:
        return normalize_menu([], inst.q_max)
    near = values >= best - tol.compare * max(1.0, abs(best))
    price = float(candidates[near].max())
    logger.debug("Linear single item: price %.6f, revenue %.6f", price, best)
    return normalize_menu([(inst.q_max, price)], inst.q_max)
