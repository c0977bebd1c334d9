"""
Buyer choice from a menu: best responses, cutoff types and the segmentation of
the type space into purchasing intervals, with exact revenue and welfare.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from certmenu.errors import ConsistencyError
from certmenu.model import expect
from certmenu.utils import DEFAULT_TOLERANCES, first_true

logger = logging.getLogger(__name__)

SEGMENT_COLUMNS = ["theta_from", "theta_to", "quality", "price", "mass"]
SCAN_POINTS = 65


def utilities(inst, menu, thetas):
    """Utility table of shape (len(menu), len(thetas))."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    return inst.v.grid(menu.qualities, thetas) - menu.prices[:, None]


def choose_items(inst, menu, thetas):
    """
    Vectorized best response; exact ties go to the higher quality.
    Args:
        inst: PricingInstance.
        menu: Menu, normalized.
        thetas: array of buyer types.
    Returns:
        indices: int array of chosen item indices, one per type.
    """
    table = utilities(inst, menu, thetas)
    last = len(menu) - 1
    return last - np.argmax(table[::-1, :], axis=0)


def best_response(inst, menu, theta):
    return int(choose_items(inst, menu, [theta])[0])


def _first_preferring(inst, item_a, item_b, tol):
    # lowest type in the support weakly preferring item_b; None when none does
    (qa, pa), (qb, pb) = item_a, item_b
    lo, hi = inst.support

    def gain(theta):
        return inst.v(qb, theta) - inst.v(qa, theta) - (pb - pa)

    if gain(hi) < 0:
        return None, None
    if gain(lo) >= 0:
        return lo, float(gain(lo))
    return float(first_true(lambda t: gain(t) >= 0, lo, hi, tol)), 0.0


def indifference_type(inst, item_a, item_b, tol=DEFAULT_TOLERANCES):
    """
    Type indifferent between item_a and item_b, where item_a has the lower
    quality. The difference in utilities is non-decreasing in the type, so the
    crossing is unique when the difference changes sign over the support.
    Returns:
        theta: float, or None when one item is strictly preferred by every type.
    """
    theta, gain_at = _first_preferring(inst, item_a, item_b, tol)
    if theta is None or gain_at > 0:
        return None
    return theta


def lowest_buyer(inst, item, tol=DEFAULT_TOLERANCES):
    """
    Infimum type willing to pay for item over nothing, clipped to the support.
    Returns:
        theta: float, or None when even the top type declines.
    """
    return _first_preferring(inst, (0.0, 0.0), item, tol)[0]


@dataclass(frozen=True)
class Segment:
    theta_from: float
    theta_to: float
    item_index: int
    quality: float
    price: float
    mass: float

    def row(self):
        return [self.theta_from, self.theta_to, self.quality, self.price, self.mass]


@dataclass(frozen=True)
class MarketOutcome:
    """
    Realized demand for a menu.

    Attributes:
        segments: tuple of Segment, ordered by type; each has positive mass.
        revenue: expected payments net of the verification cost.
        welfare: expected value of purchased qualities net of the verification cost.
        buyer_surplus: welfare - revenue.
    """
    segments: tuple
    revenue: float
    welfare: float
    buyer_surplus: float
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def items_sold(self):
        return sorted({s.item_index for s in self.segments})

    @property
    def cutoffs(self):
        return [(s.theta_from, s.theta_to, s.item_index) for s in self.segments]

    def item_at(self, thetas):
        starts = np.array([s.theta_from for s in self.segments])
        items = np.array([s.item_index for s in self.segments])
        where = np.searchsorted(starts, np.asarray(thetas, dtype=float), side="right") - 1
        return items[np.clip(where, 0, len(items) - 1)]

    def to_frame(self):
        return pd.DataFrame([s.row() for s in self.segments], columns=SEGMENT_COLUMNS)

    def to_csv(self, path=None):
        return self.to_frame().to_csv(path, index=False)

    def to_dict(self):
        return {"segments": [s.row() for s in self.segments], "revenue": self.revenue,
                "welfare": self.welfare, "buyer_surplus": self.buyer_surplus}


def _next_switch(inst, menu, current, start, tol):
    """
    Lowest type above start at which some higher-quality item becomes weakly
    better than the current one, and that item (highest quality among ties).
    """
    hi = inst.support[1]
    candidates = np.arange(current + 1, len(menu))
    if len(candidates) == 0 or start >= hi:
        return None, None
    qualities, prices = menu.qualities, menu.prices
    qc, pc = qualities[candidates], prices[candidates]
    q_cur, p_cur = qualities[current], prices[current]

    # coarse scan localizes the earliest switch before bisecting
    scan = np.linspace(start, hi, SCAN_POINTS)
    gains = inst.v.grid(qc, scan) - inst.v(q_cur, scan)[None, :] - (pc - p_cur)[:, None]
    ok = gains >= 0
    reachable = ok.any(axis=1)
    if not reachable.any():
        return None, None
    first = np.where(reachable, ok.argmax(axis=1), SCAN_POINTS)
    cell = int(first.min())
    tied = np.flatnonzero(first == cell)
    if cell == 0:
        switches = np.full(len(tied), start)
    else:
        def predicate(theta):
            return inst.v(qc[tied], theta) - inst.v(q_cur, theta) - (pc[tied] - p_cur) >= 0
        switches = first_true(predicate, np.full(len(tied), scan[cell - 1]), np.full(len(tied), scan[cell]), tol)
    earliest = switches.min()
    winners = tied[switches <= earliest + tol.root]
    return float(earliest), int(candidates[winners.max()])


def segment_outcome(inst, menu, tol=DEFAULT_TOLERANCES, check=True):
    """
    Partition the type support into purchasing intervals and evaluate the menu.
    Args:
        inst: PricingInstance.
        menu: Menu, normalized.
        tol: Tolerances.
        check: bool. Cross-check the segmentation against best responses at random probe types.
    Returns:
        outcome: MarketOutcome.
    """
    lo, hi = inst.support
    current = best_response(inst, menu, lo)
    start = lo
    raw = []
    while True:
        switch, nxt = _next_switch(inst, menu, current, start, tol)
        if switch is None:
            raw.append((start, hi, current))
            break
        raw.append((start, switch, current))
        start, current = switch, nxt

    segments = []
    revenue = welfare = 0.0
    for index, (a, b, item) in enumerate(raw):
        last = index == len(raw) - 1
        mass = inst.dist.survival(a) - (0.0 if last else inst.dist.survival(b))
        if mass <= 0:
            continue
        q, p = menu[item]
        cost = inst.c if q > 0 else 0.0
        revenue += (p - cost) * mass
        if q > 0:
            welfare += expect(inst.dist, lambda t, q=q: inst.v(q, t), a, b, closed=last, tol=tol) - cost * mass
        segments.append(Segment(float(a), float(b), int(item), float(q), float(p), float(mass)))

    outcome = MarketOutcome(tuple(segments), float(revenue), float(welfare), float(welfare - revenue))
    if check:
        _cross_check(inst, menu, outcome, tol)
    logger.debug("Segmented %d-item menu into %d segments, revenue %.6f", len(menu), len(segments), revenue)
    return outcome


def _cross_check(inst, menu, outcome, tol):
    rng = np.random.default_rng(tol.probe_seed)
    thetas = inst.dist.quantile(rng.random(tol.n_probes))
    table = utilities(inst, menu, thetas)
    assigned = outcome.item_at(thetas)
    gap = table.max(axis=0) - table[assigned, np.arange(len(thetas))]
    worst = int(np.argmax(gap))
    if gap[worst] > tol.probe_tol:
        raise ConsistencyError("Segmentation disagrees with the best response at theta={}".format(thetas[worst]),
                               theta=float(thetas[worst]), assigned=int(assigned[worst]),
                               best=int(choose_items(inst, menu, [thetas[worst]])[0]), gap=float(gap[worst]))


def revenue(inst, menu, tol=DEFAULT_TOLERANCES):
    return segment_outcome(inst, menu, tol).revenue


def welfare(inst, menu, tol=DEFAULT_TOLERANCES):
    return segment_outcome(inst, menu, tol).welfare


def sold_menu(inst, menu, tol=DEFAULT_TOLERANCES):
    """The menu restricted to items bought by a positive mass of types."""
    outcome = segment_outcome(inst, menu, tol)
    keep = set(outcome.items_sold) | {0}
    return menu.without(set(range(len(menu))) - keep)
