"""
Primitives of the certification economy and of the single-buyer pricing problem:
type distributions, valuation families, menus, validators and expectations.
"""

import math
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from certmenu.errors import DomainError, EvaluationError, NumericError, ValidationError
from certmenu.utils import DEFAULT_TOLERANCES

logger = logging.getLogger(__name__)


def _out(values, like):
    values = np.asarray(values, dtype=float)
    return float(values) if np.ndim(like) == 0 else values


class TypeDistribution(ABC):
    """
    Law of a one-dimensional type on [support_lo, support_hi], optionally with
    an atom of mass `atom` at support_hi. cdf and quantile are the primitives.
    """
    family = "abstract"
    atom = 0.0

    def __init__(self, support_lo, support_hi):
        if not support_hi > support_lo:
            raise DomainError("Empty support [{}, {}]".format(support_lo, support_hi))
        self.support_lo = float(support_lo)
        self.support_hi = float(support_hi)

    @abstractmethod
    def cdf(self, x):
        pass

    @abstractmethod
    def quantile(self, u):
        pass

    @abstractmethod
    def params(self):
        pass

    def survival(self, h):
        """
        Pr[theta >= h] = 1 - cdf(h-), counting the atom at support_hi.
        """
        h_arr = np.asarray(h, dtype=float)
        left = np.where(h_arr > self.support_hi, 1.0,
                        np.where(h_arr == self.support_hi, 1.0 - self.atom, self.cdf(h_arr)))
        return _out(1.0 - left, h)

    def contains(self, x, slack=1e-12):
        return self.support_lo - slack <= x <= self.support_hi + slack

    def to_dict(self):
        record = {"family": self.family}
        record.update(self.params())
        return record

    def __repr__(self):
        return "{}({})".format(type(self).__name__, ", ".join("{}={}".format(k, v) for k, v in self.params().items()))


class Uniform(TypeDistribution):
    family = "uniform"

    def __init__(self, lo=0.0, hi=1.0):
        super().__init__(lo, hi)

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        return _out(np.clip((x_arr - self.support_lo) / (self.support_hi - self.support_lo), 0.0, 1.0), x)

    def quantile(self, u):
        u_arr = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        return _out(self.support_lo + u_arr * (self.support_hi - self.support_lo), u)

    def params(self):
        return {"lo": self.support_lo, "hi": self.support_hi}


class EqualRevenue(TypeDistribution):
    """
    Pr[theta >= h] = 1/h on [1, H]; the mass 1/H left at h = H sits in an atom.
    """
    family = "equal_revenue"

    def __init__(self, H):
        if H < 1:
            raise DomainError("Equal-revenue distribution needs H >= 1, got {}".format(H))
        super().__init__(1.0, H if H > 1 else 1.0 + 1e-12)
        self.H = float(H)
        self.atom = 1.0 / self.H

    def cdf(self, x):
        x_arr = np.asarray(x, dtype=float)
        safe = np.maximum(x_arr, 1.0)
        values = np.where(x_arr < 1.0, 0.0, np.where(x_arr >= self.H, 1.0, 1.0 - 1.0 / safe))
        return _out(values, x)

    def quantile(self, u):
        u_arr = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            values = np.where(u_arr >= 1.0 - self.atom, self.H, 1.0 / np.maximum(1.0 - u_arr, 1e-300))
        return _out(np.minimum(values, self.H), u)

    def params(self):
        return {"H": self.H}


class PiecewiseCdf(TypeDistribution):
    """
    Continuous distribution whose cdf is linear between knots [[theta, F(theta)], ...].
    """
    family = "piecewise_cdf"

    def __init__(self, knots):
        knots = np.asarray(knots, dtype=float)
        if knots.ndim != 2 or knots.shape[1] != 2 or len(knots) < 2:
            raise DomainError("Knots must be a list of at least two [theta, F] pairs")
        thetas, probs = knots[:, 0], knots[:, 1]
        if np.any(np.diff(thetas) <= 0) or np.any(np.diff(probs) <= 0):
            raise DomainError("Knot types and probabilities must be strictly increasing")
        if abs(probs[0]) > 1e-12 or abs(probs[-1] - 1.0) > 1e-12:
            raise DomainError("Knot probabilities must run from 0 to 1")
        super().__init__(thetas[0], thetas[-1])
        self.thetas = thetas
        self.probs = probs

    def cdf(self, x):
        return _out(np.interp(np.asarray(x, dtype=float), self.thetas, self.probs, left=0.0, right=1.0), x)

    def quantile(self, u):
        return _out(np.interp(np.clip(np.asarray(u, dtype=float), 0.0, 1.0), self.probs, self.thetas), u)

    def params(self):
        return {"knots": np.column_stack([self.thetas, self.probs]).tolist()}


def distribution_from_dict(record):
    if not isinstance(record, dict):
        raise DomainError("Distribution must be an object with a 'family', got {!r}".format(record))
    family = record.get("family")
    try:
        if family == "uniform":
            return Uniform(float(record.get("lo", 0.0)), float(record.get("hi", 1.0)))
        if family == "equal_revenue":
            return EqualRevenue(float(record["H"]))
        if family == "piecewise_cdf":
            return PiecewiseCdf(record["knots"])
    except DomainError:
        raise
    except KeyError as err:
        raise DomainError("Distribution '{}' needs field {}".format(family, err)) from err
    except (TypeError, ValueError) as err:
        raise DomainError("Malformed '{}' distribution: {}".format(family, err)) from err
    raise DomainError("Unknown distribution family '{}'".format(family))


def expect(dist, integrand, lo=None, hi=None, closed=None, tol=DEFAULT_TOLERANCES):
    """
    Integral of integrand over dist restricted to types in [lo, hi) (or [lo, hi]
    when closed). The continuous part is integrated in quantile space, the atom
    at support_hi is added separately.
    Args:
        dist: TypeDistribution.
        integrand: callable theta -> real, bounded on the support.
        lo, hi: float or None. Type range; defaults to the whole support.
        closed: bool or None. Include hi itself; defaults to True when hi reaches support_hi.
        tol: Tolerances.
    Returns:
        value: float.
    """
    a = dist.support_lo if lo is None else max(float(lo), dist.support_lo)
    b = dist.support_hi if hi is None else min(float(hi), dist.support_hi)
    if closed is None:
        closed = b >= dist.support_hi
    top = 1.0 - dist.atom
    u_a = min(1.0 - dist.survival(a), top)
    u_b = top if b >= dist.support_hi else min(1.0 - dist.survival(b), top)

    total = 0.0
    if u_b > u_a:
        result = quad(lambda u: float(integrand(dist.quantile(u))), u_a, u_b,
                      epsabs=tol.quad, epsrel=tol.quad, limit=200, full_output=1)
        value, error = result[0], result[1]
        if len(result) > 3 and error > tol.quad_fail:
            raise NumericError("Quadrature did not converge on [{}, {}]: {}".format(a, b, result[3]),
                               estimate=value, error=error)
        total += value
    if closed and dist.atom > 0 and b >= dist.support_hi:
        total += dist.atom * float(integrand(dist.support_hi))
    return total


@dataclass(frozen=True)
class ValuationFamily:
    """
    v(q; theta) on quantities [0, q_max], with slope bound lam at q = 0.
    fn must broadcast over numpy arrays of q and theta.
    """
    fn: Callable
    q_max: float
    lam: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, q, theta):
        return np.asarray(self.fn(np.asarray(q, dtype=float), np.asarray(theta, dtype=float)), dtype=float)

    def grid(self, qualities, thetas):
        """Value table of shape (len(qualities), len(thetas))."""
        q = np.asarray(qualities, dtype=float)[:, None]
        t = np.asarray(thetas, dtype=float)[None, :]
        return np.broadcast_to(self(q, t), (q.shape[0], t.shape[1])).astype(float)


@dataclass(frozen=True)
class PricingInstance:
    """
    Single-buyer non-linear pricing problem: valuation v, buyer types dist,
    cost c for every non-trivial sale.
    """
    v: ValuationFamily
    dist: TypeDistribution
    c: float = 0.0
    name: str = "custom"

    @property
    def q_max(self):
        return self.v.q_max

    @property
    def lam(self):
        return self.v.lam

    @property
    def support(self):
        return self.dist.support_lo, self.dist.support_hi

    def value_scale(self, qualities=None):
        """Largest willingness to pay, max_q v(q; theta_hi), floored at 1."""
        if qualities is None:
            qualities = np.linspace(0.0, self.q_max, 257)
        top = np.max(self.v(np.asarray(qualities, dtype=float), self.dist.support_hi))
        return max(1.0, float(top))

    def validate(self, n_grid=50, tol=DEFAULT_TOLERANCES):
        report = validate_single_crossing(self.v, n_grid, support=self.support, tol=tol)
        if self.c < 0:
            report.violations.append({"kind": "cost", "c": self.c})
        if not (self.lam > 0 and self.q_max > 0):
            report.violations.append({"kind": "bounds", "lam": self.lam, "q_max": self.q_max})
        return report

    def check(self, n_grid=50, tol=DEFAULT_TOLERANCES):
        report = self.validate(n_grid, tol)
        if not report.passed:
            raise ValidationError("Pricing instance '{}' fails validation".format(self.name), report=report)
        return self


@dataclass(frozen=True)
class CertificationEconomy:
    """
    Two-sided certification market: consumer value f(q; phi), producer cost
    g(q; psi), consumer types F, producer types G and verification cost c.
    """
    f: Callable
    g: Callable
    F: TypeDistribution
    G: TypeDistribution
    c: float = 0.0
    q_max: float = 1.0
    lam: float = 1.0
    name: str = "custom"

    def consumer_value(self, q, phi):
        return np.asarray(self.f(np.asarray(q, dtype=float), np.asarray(phi, dtype=float)), dtype=float)

    def producer_cost(self, q, psi):
        return np.asarray(self.g(np.asarray(q, dtype=float), np.asarray(psi, dtype=float)), dtype=float)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    n_violations: int = 0

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {"passed": self.passed, "n_violations": max(self.n_violations, len(self.violations)),
                "violations": self.violations, "warnings": self.warnings}


MAX_LISTED = 100


def _value_table(fn, n_grid, q_max, support):
    qualities = np.linspace(0.0, q_max, n_grid)
    thetas = np.linspace(support[0], support[1], n_grid)
    table = np.broadcast_to(np.asarray(fn(qualities[:, None], thetas[None, :]), dtype=float),
                            (n_grid, n_grid)).astype(float)
    bad = np.argwhere(~np.isfinite(table))
    if len(bad):
        a, b = bad[0]
        raise EvaluationError("Non-finite value at q={}, theta={}".format(qualities[a], thetas[b]),
                              q=float(qualities[a]), theta=float(thetas[b]))
    return qualities, thetas, table


def _crossing_violations(qualities, thetas, table, sign, tol, report, label):
    """
    Collect grid 4-tuples where increments table[q2] - table[q1] fail to rise
    (sign=+1) or fall (sign=-1) weakly in the type.
    """
    n = len(qualities)
    inc = table[None, :, :] - table[:, None, :]          # [q1, q2, theta]
    diff = sign * (inc[:, :, None, :] - inc[:, :, :, None])   # [q1, q2, theta1, theta2]
    upper_q = np.triu(np.ones((n, n), dtype=bool), 1)[:, :, None, None]
    upper_t = np.triu(np.ones((n, n), dtype=bool), 1)[None, None, :, :]
    mask = upper_q & upper_t
    failing = mask & (diff < -tol.compare)
    flat = mask & (np.abs(diff) <= tol.compare)
    count = int(failing.sum())
    report.n_violations += count
    for q1, q2, t1, t2 in np.argwhere(failing)[:MAX_LISTED]:
        report.violations.append({"kind": label, "theta1": float(thetas[t1]), "theta2": float(thetas[t2]),
                                  "q1": float(qualities[q1]), "q2": float(qualities[q2]),
                                  "gap": float(diff[q1, q2, t1, t2])})
    n_flat = int(flat.sum())
    if n_flat:
        report.warnings.append({"kind": label + "_weak", "count": n_flat})


def _curvature_violations(qualities, thetas, table, sign, tol, report, label):
    # sign=+1: concave (midpoint above the chord); sign=-1: convex
    mid = table[1:-1, :]
    chord = 0.5 * (table[:-2, :] + table[2:, :])
    failing = sign * (mid - chord) < -tol.compare
    report.n_violations += int(failing.sum())
    for a, b in np.argwhere(failing)[:MAX_LISTED]:
        report.violations.append({"kind": label, "q": float(qualities[a + 1]), "theta": float(thetas[b])})


def validate_single_crossing(family, n_grid=50, support=(0.0, 1.0), tol=DEFAULT_TOLERANCES):
    """
    Grid check of weak single-crossing, concavity in q, normalization v(0; .) = 0,
    monotonicity in type and the slope bound at q = 0.
    Args:
        family: ValuationFamily.
        n_grid: int >= 3. Points per axis.
        support: (float, float). Type range to check.
        tol: Tolerances.
    Returns:
        report: ValidationReport; report.passed is True when no violation was found.
    """
    if n_grid < 3:
        raise DomainError("n_grid must be at least 3, got {}".format(n_grid))
    qualities, thetas, table = _value_table(family, n_grid, family.q_max, support)
    report = ValidationReport()

    _crossing_violations(qualities, thetas, table, 1.0, tol, report, "single_crossing")
    _curvature_violations(qualities, thetas, table, 1.0, tol, report, "concavity")

    zero = np.abs(table[0, :]) > tol.compare
    for b in np.flatnonzero(zero)[:MAX_LISTED]:
        report.violations.append({"kind": "normalization", "theta": float(thetas[b]), "value": float(table[0, b])})

    falling = np.diff(table, axis=1) < -tol.compare
    for a, b in np.argwhere(falling)[:MAX_LISTED]:
        report.violations.append({"kind": "type_monotone", "q": float(qualities[a]), "theta": float(thetas[b])})

    delta = family.q_max * 1e-6
    slopes = np.asarray(family(delta, thetas), dtype=float) / delta
    steep = slopes > family.lam * (1 + 1e-6) + tol.compare
    for b in np.flatnonzero(steep)[:MAX_LISTED]:
        report.violations.append({"kind": "slope_bound", "theta": float(thetas[b]), "slope": float(slopes[b])})

    report.n_violations += int(zero.sum() + falling.sum() + steep.sum())
    logger.debug("Validated %s on a %d-point grid: %d violations", family.name, n_grid, report.n_violations)
    return report


def validate_economy(economy, n_grid=50, tol=DEFAULT_TOLERANCES):
    """
    Grid checks of the economy primitives: f concave non-decreasing with f(0) = 0
    and consumer single-crossing; g convex non-decreasing with g(0) = 0 and the
    reversed producer single-crossing. f <= 1 is reported as a warning.
    """
    report = ValidationReport()
    F_support = (economy.F.support_lo, economy.F.support_hi)
    G_support = (economy.G.support_lo, economy.G.support_hi)

    qualities, phis, f_table = _value_table(economy.consumer_value, n_grid, economy.q_max, F_support)
    _crossing_violations(qualities, phis, f_table, 1.0, tol, report, "consumer_single_crossing")
    _curvature_violations(qualities, phis, f_table, 1.0, tol, report, "consumer_concavity")
    if np.any(np.diff(f_table, axis=0) < -tol.compare):
        report.violations.append({"kind": "consumer_monotone"})
    if np.any(np.abs(f_table[0]) > tol.compare):
        report.violations.append({"kind": "consumer_normalization"})
    if np.max(f_table) > 1 + tol.compare:
        report.warnings.append({"kind": "consumer_scale", "max_value": float(np.max(f_table))})

    qualities, psis, g_table = _value_table(economy.producer_cost, n_grid, economy.q_max, G_support)
    _crossing_violations(qualities, psis, g_table, -1.0, tol, report, "producer_single_crossing")
    _curvature_violations(qualities, psis, g_table, -1.0, tol, report, "producer_convexity")
    if np.any(np.diff(g_table, axis=0) < -tol.compare):
        report.violations.append({"kind": "producer_monotone"})
    if np.any(np.abs(g_table[0]) > tol.compare):
        report.violations.append({"kind": "producer_normalization"})

    if economy.c < 0:
        report.violations.append({"kind": "cost", "c": economy.c})
    return report


@dataclass(frozen=True)
class Menu:
    """
    Sorted (quality, price) items; items[0] is always the trivial item (0, 0).
    """
    items: tuple

    @property
    def qualities(self):
        return np.array([q for q, _ in self.items], dtype=float)

    @property
    def prices(self):
        return np.array([p for _, p in self.items], dtype=float)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, index):
        return self.items[index]

    def is_monotone(self, tol=0.0):
        return bool(np.all(np.diff(self.prices) >= -tol))

    def without(self, indices):
        drop = set(indices) - {0}
        return Menu(tuple(item for i, item in enumerate(self.items) if i not in drop))

    def to_list(self):
        return [[float(q), float(p)] for q, p in self.items]

    @classmethod
    def trivial(cls):
        return cls(((0.0, 0.0),))


def normalize_menu(raw, q_max=math.inf):
    """
    Canonical menu: sorted by quality, trivial item present, duplicate qualities
    collapsed to their lowest price. Non-monotone prices are kept.
    """
    best = {0.0: 0.0}
    for quality, price in raw:
        quality, price = float(quality), float(price)
        if not (math.isfinite(quality) and math.isfinite(price)):
            raise DomainError("Menu entries must be finite, got ({}, {})".format(quality, price))
        if quality < 0 or quality > q_max * (1 + 1e-12):
            raise DomainError("Quality {} outside [0, {}]".format(quality, q_max))
        if quality == 0.0:
            # the free trivial certificate is always on offer
            continue
        if quality not in best or price < best[quality]:
            best[quality] = price
    return Menu(tuple(sorted(best.items())))
