"""
Assortative matching of producers to consumers and the reduction of a
certification economy to a single-buyer pricing problem over producer types.
"""

import logging

import numpy as np

from certmenu.errors import DomainError, ReductionError
from certmenu.model import PricingInstance, ValuationFamily, validate_single_crossing
from certmenu.utils import DEFAULT_TOLERANCES

logger = logging.getLogger(__name__)


def _matched(economy, psi):
    psi = np.clip(np.asarray(psi, dtype=float), economy.G.support_lo, economy.G.support_hi)
    return economy.F.quantile(economy.G.cdf(psi))


def matched_consumer(economy, psi):
    """
    Consumer type at the same quantile as producer type psi: F^-1(G(psi)).
    """
    psi_arr = np.asarray(psi, dtype=float)
    slack = 1e-12 * max(1.0, abs(economy.G.support_hi))
    if np.any(psi_arr < economy.G.support_lo - slack) or np.any(psi_arr > economy.G.support_hi + slack):
        raise DomainError("Producer type {} outside [{}, {}]".format(psi, economy.G.support_lo,
                                                                     economy.G.support_hi))
    matched = _matched(economy, psi_arr)
    return float(matched) if np.ndim(psi) == 0 else matched


def reduce_to_pricing(economy, n_grid=50, tol=DEFAULT_TOLERANCES):
    """
    Pricing instance over producer types with v(q; psi) = f(q; phi(psi)) - g(q; psi).
    Args:
        economy: CertificationEconomy.
        n_grid: int. Grid used to validate the reduced valuation.
        tol: Tolerances.
    Returns:
        inst: PricingInstance with dist = G and the economy's cost c.
    """
    def value(q, psi):
        return economy.consumer_value(q, _matched(economy, psi)) - economy.producer_cost(q, psi)

    v = ValuationFamily(value, q_max=economy.q_max, lam=economy.lam, name=economy.name + "_reduced")
    inst = PricingInstance(v, economy.G, c=economy.c, name=economy.name)

    report = validate_single_crossing(v, n_grid, support=inst.support, tol=tol)
    if not report.passed:
        raise ReductionError("Reduced valuation of '{}' fails validation".format(economy.name), report=report)
    logger.debug("Reduced economy '%s' to a pricing instance over producer types", economy.name)
    return inst
