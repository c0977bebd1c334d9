"""
Named instances and their JSON descriptions.
"""

import json
import math
import logging
from dataclasses import dataclass, field

import numpy as np

from certmenu.errors import CertMenuError, DomainError, ValidationError
from certmenu.model import (CertificationEconomy, EqualRevenue, PricingInstance, Uniform,
                            ValuationFamily, distribution_from_dict, normalize_menu, validate_economy)
from certmenu.reduction import reduce_to_pricing
from certmenu.utils import DEFAULT_TOLERANCES

logger = logging.getLogger(__name__)


def linear_value(q, theta):
    return theta * q


def gap_value(q, theta):
    return np.minimum(q, 2.0 * theta - q)


def quadratic_value(b):
    def value(q, theta):
        return theta * q - 0.5 * b * q * q
    return value


def unit_consumer(q, phi):
    return q + 0.0 * phi


def saturating_consumer(q, phi):
    return 0.5 * phi * q * (2.0 - q)


def quadratic_cost(q, psi):
    return q * q / (2.0 * psi)


def hinge_cost(q, psi):
    return np.maximum(0.0, 2.0 * (q - psi))


def zero_cost(q, psi):
    return 0.0 * q * psi


# name -> (builder taking params, slope bound at q = 0 given the top type)
VALUATIONS = {
    "linear": (lambda params: linear_value, lambda top, params: top),
    "piecewise_gap": (lambda params: gap_value, lambda top, params: 1.0),
    "quadratic": (lambda params: quadratic_value(params.get("b", 1.0)), lambda top, params: top),
}

CONSUMER_VALUES = {
    "linear": (linear_value, lambda top: top),
    "unit": (unit_consumer, lambda top: 1.0),
    "saturating": (saturating_consumer, lambda top: top),
}

PRODUCER_COSTS = {
    "quadratic": quadratic_cost,
    "hinge": hinge_cost,
    "zero": zero_cost,
}


def _positive(params, key, default=None):
    value = params.get(key, default)
    if value is None:
        raise DomainError("Missing parameter '{}'".format(key))
    value = float(value)
    if not value > 0:
        raise DomainError("Parameter '{}' must be positive, got {}".format(key, value))
    return value


def _equal_revenue_H(params):
    H = float(params.get("H", math.e ** 4))
    if H < 1:
        raise DomainError("H must be at least 1, got {}".format(H))
    return H


def _linear_equal_revenue(params):
    H = _equal_revenue_H(params)
    v = ValuationFamily(linear_value, q_max=1.0, lam=H, name="linear")
    return PricingInstance(v, EqualRevenue(H), c=float(params.get("c", 0.0)), name="linear_equal_revenue")


def _piecewise_gap(params):
    H = _equal_revenue_H(params)
    v = ValuationFamily(gap_value, q_max=2.0 * H, lam=1.0, name="piecewise_gap")
    return PricingInstance(v, EqualRevenue(H), c=float(params.get("c", 0.0)), name="piecewise_gap")


def _linear_uniform(params):
    v = ValuationFamily(linear_value, q_max=1.0, lam=1.0, name="linear")
    return PricingInstance(v, Uniform(0.0, 1.0), c=float(params.get("c", 0.0)), name="linear_uniform")


def _quadratic_screening(params):
    a = _positive(params, "a", 0.5)
    b = _positive(params, "b", 1.0)
    if not b > a:
        raise DomainError("quadratic_screening needs a < b, got a={}, b={}".format(a, b))
    return CertificationEconomy(f=linear_value, g=quadratic_cost, F=Uniform(a, b), G=Uniform(a, b),
                                c=float(params.get("c", 0.0)), q_max=1.0, lam=b, name="quadratic_screening")


def _gap_economy(params):
    H = _equal_revenue_H(params)
    return CertificationEconomy(f=unit_consumer, g=hinge_cost, F=EqualRevenue(H), G=EqualRevenue(H),
                                c=float(params.get("c", 0.0)), q_max=2.0 * H, lam=1.0, name="gap_economy")


def _linear_equal_revenue_economy(params):
    H = _equal_revenue_H(params)
    return CertificationEconomy(f=linear_value, g=zero_cost, F=EqualRevenue(H), G=Uniform(0.0, 1.0),
                                c=float(params.get("c", 0.0)), q_max=1.0, lam=H,
                                name="linear_equal_revenue_economy")


def _custom(params):
    kind = params.get("kind", "pricing")
    c = float(params.get("c", 0.0))
    q_max = _positive(params, "q_max", 1.0)
    if kind == "pricing":
        name = params.get("valuation", "linear")
        if name not in VALUATIONS:
            raise DomainError("Unknown valuation '{}'".format(name))
        build, bound = VALUATIONS[name]
        dist = distribution_from_dict(params.get("distribution", {"family": "uniform"}))
        lam = float(params.get("lambda", bound(dist.support_hi, params)))
        v = ValuationFamily(build(params), q_max=q_max, lam=lam, name=name,
                            params={k: params[k] for k in ("b",) if k in params})
        return PricingInstance(v, dist, c=c, name="custom")
    if kind == "economy":
        consumer = params.get("consumer", "linear")
        producer = params.get("producer", "zero")
        if consumer not in CONSUMER_VALUES:
            raise DomainError("Unknown consumer value '{}'".format(consumer))
        if producer not in PRODUCER_COSTS:
            raise DomainError("Unknown producer cost '{}'".format(producer))
        F = distribution_from_dict(params.get("F", {"family": "uniform"}))
        G = distribution_from_dict(params.get("G", {"family": "uniform"}))
        f, bound = CONSUMER_VALUES[consumer]
        lam = float(params.get("lambda", bound(F.support_hi)))
        return CertificationEconomy(f=f, g=PRODUCER_COSTS[producer], F=F, G=G, c=c, q_max=q_max, lam=lam,
                                    name="custom")
    raise DomainError("Unknown instance kind '{}'".format(kind))


ZOO = {
    "linear_equal_revenue": ("pricing", _linear_equal_revenue),
    "piecewise_gap": ("pricing", _piecewise_gap),
    "linear_uniform": ("pricing", _linear_uniform),
    "quadratic_screening": ("economy", _quadratic_screening),
    "gap_economy": ("economy", _gap_economy),
    "linear_equal_revenue_economy": ("economy", _linear_equal_revenue_economy),
    "custom": (None, _custom),
}

# top-level record field -> custom builder parameter
RECORD_FIELDS = {
    "pricing": {"distribution": "distribution", "q_max": "q_max", "c": "c", "lambda": "lambda"},
    "economy": {"distribution": "G", "consumer_distribution": "F", "q_max": "q_max", "c": "c", "lambda": "lambda"},
}
DISTRIBUTION_KEYS = {"distribution", "consumer_distribution", "F", "G"}


def _same(a, b):
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_same(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    numbers = (int, float, np.number)
    if isinstance(a, numbers) and isinstance(b, numbers) and not isinstance(a, bool) and not isinstance(b, bool):
        return math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-12)
    return a == b


def _normal(key, value):
    return distribution_from_dict(value).to_dict() if key in DISTRIBUTION_KEYS else value


def _merge(params, key, value):
    if key in params and not _same(_normal(key, params[key]), _normal(key, value)):
        raise DomainError("Field '{}' conflicts with params: {!r} vs {!r}".format(key, value, params[key]),
                          field=key)
    params[key] = value


def _check_record(spec, record):
    built = spec.to_dict()
    if "kind" in record and record["kind"] != spec.kind:
        raise DomainError("Instance '{}' is a {} instance, record says {}".format(spec.name, spec.kind,
                                                                                  record["kind"]), field="kind")
    for key in ("distribution", "consumer_distribution", "q_max", "c", "lambda"):
        if key in record and not _same(_normal(key, record[key]), built.get(key)):
            raise DomainError("Field '{}' of instance '{}' does not match the built instance: {!r} vs {!r}".format(
                key, spec.name, record[key], built.get(key)), field=key)


@dataclass(frozen=True)
class InstanceSpec:
    """
    Tagged description of a pricing instance or an economy, rebuilt from its
    zoo name and parameters.

    Attributes:
        kind: "pricing" or "economy".
        name: zoo entry.
        params: parameters handed to the zoo builder.
        instance: the built PricingInstance or CertificationEconomy.
    """
    kind: str
    name: str
    params: dict = field(default_factory=dict)
    instance: object = field(default=None, compare=False, repr=False)

    @property
    def is_economy(self):
        return self.kind == "economy"

    def pricing(self):
        """The single-buyer problem; economies are reduced first."""
        if self.is_economy:
            return reduce_to_pricing(self.instance)
        return self.instance

    def economy(self):
        if not self.is_economy:
            raise DomainError("Instance '{}' is a pricing instance, not an economy".format(self.name))
        return self.instance

    def to_dict(self):
        obj = self.instance
        if self.is_economy:
            distribution = obj.G.to_dict()
        else:
            distribution = obj.dist.to_dict()
        record = {"kind": self.kind, "name": self.name, "params": self.params,
                  "distribution": distribution, "q_max": obj.q_max, "c": obj.c, "lambda": obj.lam}
        if self.is_economy:
            record["consumer_distribution"] = obj.F.to_dict()
        return record

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, record):
        """
        Rebuild a spec from its JSON record. Custom instances take the top-level
        distribution, q_max, c and lambda fields as builder parameters; every
        top-level field must agree with the rebuilt instance.
        """
        if not isinstance(record, dict) or not isinstance(record.get("name"), str):
            raise DomainError("Instance record needs a string 'name'")
        name = record["name"]
        params = record.get("params") or {}
        if not isinstance(params, dict):
            raise DomainError("Instance params must be an object, got {!r}".format(params))
        params = dict(params)
        try:
            if name == "custom":
                kind = record.get("kind", params.get("kind", "pricing"))
                if kind not in RECORD_FIELDS:
                    raise DomainError("Unknown instance kind '{}'".format(kind))
                _merge(params, "kind", kind)
                for key, target in RECORD_FIELDS[kind].items():
                    if key in record:
                        _merge(params, target, record[key])
                spec = make_named_instance(name, params)
            else:
                spec = make_named_instance(name, params)
                if "c" in record and "c" not in params and not _same(record["c"], spec.instance.c):
                    params["c"] = record["c"]
                    spec = make_named_instance(name, params)
        except CertMenuError:
            raise
        except (KeyError, TypeError, ValueError) as err:
            raise DomainError("Malformed instance record: {}".format(err), name=name) from err
        _check_record(spec, record)
        return spec

    @classmethod
    def from_json(cls, text):
        try:
            record = json.loads(text)
        except ValueError as err:
            raise DomainError("Instance description is not valid JSON: {}".format(err)) from err
        return cls.from_dict(record)


def make_named_instance(name, params=None, n_grid=50, tol=DEFAULT_TOLERANCES):
    """
    Build and validate a zoo entry.
    Args:
        name: str. One of ZOO.
        params: dict or None. Builder parameters (H, a, b, c, or the custom components).
        n_grid: int. Validation grid size.
        tol: Tolerances.
    Returns:
        spec: InstanceSpec with the built instance attached.
    """
    params = dict(params or {})
    if name not in ZOO:
        raise DomainError("Unknown instance '{}'; choose one of {}".format(name, sorted(ZOO)))
    kind, build = ZOO[name]
    obj = build(params)
    kind = kind or ("economy" if isinstance(obj, CertificationEconomy) else "pricing")

    if kind == "economy":
        report = validate_economy(obj, n_grid, tol)
        if not report.passed:
            raise ValidationError("Economy '{}' fails validation".format(name), report=report)
        # the reduced valuation is validated inside the reduction
        reduce_to_pricing(obj, n_grid=n_grid, tol=tol)
    else:
        obj.check(n_grid, tol)
    logger.debug("Built %s instance '%s' with params %s", kind, name, params)
    return InstanceSpec(kind=kind, name=name, params=params, instance=obj)


def load_instance(path):
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except (OSError, UnicodeDecodeError) as err:
        raise DomainError("Cannot read instance file '{}': {}".format(path, err), path=str(path)) from err
    return InstanceSpec.from_json(text)


def rich_gap_menu(H, step=0.005):
    """
    Menu {(q, q/2)} over a geometric quality grid on [1, H]; on the gap instance
    each type buys close to its own peak quality.
    """
    if H < 1:
        raise DomainError("H must be at least 1, got {}".format(H))
    count = int(math.floor(math.log(H) / math.log1p(step))) if H > 1 else 0
    qualities = (1.0 + step) ** np.arange(count + 1)
    qualities = np.append(qualities[qualities < H], H)
    return normalize_menu([(q, q / 2.0) for q in qualities], q_max=2.0 * H)
