"""
The full certification game: producers pick certificates from the menu, consumers
buy at market-clearing prices, and the outcome is checked against the Walrasian
conditions on stratified types.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from certmenu.choice import SEGMENT_COLUMNS, segment_outcome
from certmenu.errors import ConsistencyError, EquilibriumError
from certmenu.model import expect
from certmenu.reduction import matched_consumer, reduce_to_pricing
from certmenu.utils import DEFAULT_TOLERANCES

logger = logging.getLogger(__name__)

BALANCE_TOL = 1e-7


@dataclass(frozen=True)
class GameOutcome:
    """
    Attributes:
        producer_segments: tuple of Segment over producer types.
        consumer_prices: tuple of (quality, price) for every traded quality, ascending.
        certifier_revenue: menu payments net of verification cost.
        total_welfare: gains from trade net of verification cost.
        producer_surplus: market price minus production cost minus menu price.
        consumer_surplus: consumer value minus market price.
    """
    producer_segments: tuple
    consumer_prices: tuple
    certifier_revenue: float
    total_welfare: float
    producer_surplus: float
    consumer_surplus: float
    extras: dict = field(default_factory=dict, compare=False)

    def price_of(self, quality):
        return dict(self.consumer_prices)[quality]

    def to_frame(self):
        frame = pd.DataFrame([s.row() for s in self.producer_segments], columns=SEGMENT_COLUMNS)
        prices = dict(self.consumer_prices)
        frame["market_price"] = [prices[s.quality] for s in self.producer_segments]
        return frame

    def to_csv(self, path=None):
        return self.to_frame().to_csv(path, index=False)

    def to_dict(self):
        return {"segments": [s.row() for s in self.producer_segments],
                "consumer_prices": [[q, p] for q, p in self.consumer_prices],
                "certifier_revenue": self.certifier_revenue, "total_welfare": self.total_welfare,
                "producer_surplus": self.producer_surplus, "consumer_surplus": self.consumer_surplus}


def producer_choices(economy, menu, tol=DEFAULT_TOLERANCES):
    """Segmentation of producer types by the certificate they buy."""
    return segment_outcome(reduce_to_pricing(economy, tol=tol), menu, tol)


def clearing_prices(economy, segments):
    """
    Consumer prices for the traded qualities, chained from quality 0 at price 0:
    each step makes the consumer matched to the producer cutoff indifferent
    between the two adjacent qualities.
    Args:
        economy: CertificationEconomy.
        segments: MarketOutcome from producer_choices, or its tuple of Segment.
    Returns:
        prices: tuple of (quality, price), ascending in quality.
    """
    segments = getattr(segments, "segments", segments)
    if not segments:
        return ()
    first = segments[0]
    if first.quality == 0:
        prices = [(0.0, 0.0)]
    else:
        # everyone certifies: the lowest consumer is indifferent to buying nothing
        bottom = economy.F.support_lo
        prices = [(first.quality, float(economy.consumer_value(first.quality, bottom)))]
    for segment in segments[1:]:
        q_prev, p_prev = prices[-1]
        phi = matched_consumer(economy, segment.theta_from)
        step = economy.consumer_value(segment.quality, phi) - economy.consumer_value(q_prev, phi)
        prices.append((segment.quality, float(p_prev + step)))
    return tuple(prices)


@dataclass
class WalrasianReport:
    conditions: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    @property
    def passed(self):
        return all(self.conditions.values())

    def to_dict(self):
        return {"passed": self.passed, "conditions": self.conditions, "violations": self.violations[:100]}


def verify_walrasian(economy, menu, game, n_probe=200, tol=DEFAULT_TOLERANCES):
    """
    Check demand satisfaction, measure balance, market clearing, monotone prices and
    producer no-deviation on n_probe quantile-stratified pairs of matched types.
    Returns:
        report: WalrasianReport with one flag per condition.
    """
    report = WalrasianReport()
    segments = game.producer_segments
    traded = np.array([q for q, _ in game.consumer_prices])
    market = np.array([p for _, p in game.consumer_prices])
    menu_price = dict(menu.items)

    report.conditions["monotone_prices"] = bool(np.all(np.diff(market) >= -tol.compare))
    if not segments:
        report.conditions.update(demand=True, balance=True, clearing=True, producer=True)
        return report

    quantiles = (np.arange(n_probe) + 0.5) / n_probe
    psis = economy.G.quantile(quantiles)
    phis = economy.F.quantile(quantiles)
    starts = np.array([s.theta_from for s in segments])
    where = np.clip(np.searchsorted(starts, psis, side="right") - 1, 0, len(segments) - 1)
    assigned_q = np.array([segments[w].quality for w in where])
    position = np.searchsorted(traded, assigned_q)

    consumer = economy.consumer_value(traded[:, None], phis[None, :]) - market[:, None]
    best = np.maximum(consumer.max(axis=0), 0.0)
    chosen = consumer[position, np.arange(n_probe)]
    short = best - chosen > tol.probe_tol
    report.conditions["demand"] = not short.any()
    for j in np.flatnonzero(short)[:20]:
        report.violations.append({"kind": "demand", "phi": float(phis[j]), "assigned": float(assigned_q[j]),
                                  "gap": float(best[j] - chosen[j])})

    options = np.concatenate([[0.0], traded[traded > 0]])
    option_market = np.concatenate([[0.0], market[traded > 0]])
    option_fee = np.array([menu_price.get(q, 0.0) for q in options])
    producer = option_market[:, None] - economy.producer_cost(options[:, None], psis[None, :]) - option_fee[:, None]
    own = (np.array([dict(game.consumer_prices)[q] for q in assigned_q])
           - economy.producer_cost(assigned_q, psis) - np.array([menu_price[q] for q in assigned_q]))
    deviate = producer.max(axis=0) - own > tol.probe_tol
    report.conditions["producer"] = not deviate.any()
    for j in np.flatnonzero(deviate)[:20]:
        report.violations.append({"kind": "producer", "psi": float(psis[j]), "assigned": float(assigned_q[j])})

    balance = True
    for index, s in enumerate(segments):
        last = index == len(segments) - 1
        u_from = 1.0 - economy.G.survival(s.theta_from)
        u_to = 1.0 if last else 1.0 - economy.G.survival(s.theta_to)
        if abs((u_to - u_from) - s.mass) > BALANCE_TOL:
            balance = False
            report.violations.append({"kind": "balance", "quality": s.quality, "producers": s.mass,
                                      "consumers": u_to - u_from})
    report.conditions["balance"] = balance

    sold = {s.quality for s in segments}
    unsold = [q for q, p in game.consumer_prices if q not in sold and p > 0]
    report.conditions["clearing"] = not unsold
    for q in unsold:
        report.violations.append({"kind": "clearing", "quality": q})
    return report


def full_game_outcome(economy, menu, n_probe=200, tol=DEFAULT_TOLERANCES):
    """
    Play the game for a menu: producer certificates, clearing prices and the
    split of welfare between certifier, producers and consumers.
    Returns:
        game: GameOutcome, verified against the Walrasian conditions.
    """
    inst = reduce_to_pricing(economy, tol=tol)
    reduced = segment_outcome(inst, menu, tol)
    prices = clearing_prices(economy, reduced)
    market = dict(prices)
    G = economy.G

    revenue = consumer_surplus = producer_surplus = welfare = 0.0
    for index, s in enumerate(reduced.segments):
        last = index == len(reduced.segments) - 1
        cost = economy.c if s.quality > 0 else 0.0
        p = market[s.quality]

        def consumer_gain(psi, q=s.quality, p=p):
            return economy.consumer_value(q, matched_consumer(economy, psi)) - p

        def producer_gain(psi, q=s.quality, p=p, t=s.price):
            return p - economy.producer_cost(q, psi) - t

        def gains(psi, q=s.quality, cost=cost):
            return (economy.consumer_value(q, matched_consumer(economy, psi))
                    - economy.producer_cost(q, psi) - cost)

        revenue += (s.price - cost) * s.mass
        consumer_surplus += expect(G, consumer_gain, s.theta_from, s.theta_to, closed=last, tol=tol)
        producer_surplus += expect(G, producer_gain, s.theta_from, s.theta_to, closed=last, tol=tol)
        welfare += expect(G, gains, s.theta_from, s.theta_to, closed=last, tol=tol)

    split = revenue + producer_surplus + consumer_surplus
    if abs(split - welfare) > 1e-6:
        raise ConsistencyError("Surplus split {} does not add up to welfare {}".format(split, welfare))

    game = GameOutcome(reduced.segments, prices, float(revenue), float(welfare), float(producer_surplus),
                       float(consumer_surplus), extras={"reduced": reduced})
    report = verify_walrasian(economy, menu, game, n_probe, tol)
    if not report.passed:
        raise EquilibriumError("Outcome violates the Walrasian conditions", report=report.to_dict())
    logger.info("Game on '%s': revenue %.6f, welfare %.6f", economy.name, revenue, welfare)
    return game
