"""Parity metrics as compiled expressions and as empirical plug-in statistics.

Each metric is a signed difference of (conditional) probabilities; equalized
odds is the ordered pair of rate differences, combined into a max of absolute
values at the solver level. Counterfactual variants substitute the outcome
under the policy intervention; CF/TE/SE intervene on the attribute itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .data import ObservedTable
from .events import Atom, Event, PolynomialExpr, RationalExpr, compile_probability
from .graph import NodeRoleMap
from .scheme import ResponseScheme

__all__ = [
    "MetricError",
    "MetricSpec",
    "METRIC_NAMES",
    "OBSERVATIONAL_METRICS",
    "RATE_NAMES",
    "metric_terms",
    "metric_expression",
    "empirical_metric",
    "metric_from_frequencies",
    "abs_interval",
]

OBSERVATIONAL_METRICS = ("DP", "FPRP", "FNRP", "PPP", "NPP", "EO")
COUNTERFACTUAL_METRICS = ("CF_FPRP", "CF_FNRP", "CF_PPP", "CF_NPP", "CF_EO")
CAUSAL_METRICS = ("CF", "TE", "SE")
METRIC_NAMES = OBSERVATIONAL_METRICS + COUNTERFACTUAL_METRICS + CAUSAL_METRICS
RATE_NAMES = ("FPR", "FNR", "PPV")

PAIR_METRICS = ("EO", "CF_EO")


class MetricError(ValueError):
    """Raised for unknown metrics or missing roles."""


@dataclass(frozen=True)
class MetricSpec:
    """A metric name bound to the nodes it reads.

    ``signed`` selects the signed difference (default) vs its absolute value;
    ``group`` only applies to the per-group rate statistics FPR/FNR/PPV.
    """

    name: str
    roles: NodeRoleMap
    signed: bool = True
    group: int = 0

    def __post_init__(self):
        if self.name not in METRIC_NAMES + RATE_NAMES:
            raise MetricError(f"unknown metric {self.name!r}")
        if self.name in COUNTERFACTUAL_METRICS and self.roles.policy is None:
            raise MetricError(f"{self.name} requires a policy node")

    @property
    def is_pair(self) -> bool:
        return self.name in PAIR_METRICS

    @property
    def is_observational(self) -> bool:
        return self.name in OBSERVATIONAL_METRICS + RATE_NAMES


def _rate_event(name: str, roles: NodeRoleMap, group: int, policy_do=()) -> Event:
    a, y, p = roles.attribute, roles.outcome, roles.prediction
    if name == "DP":
        return Event((Atom(p, 1),), (Atom(a, group),))
    if name == "FPRP":
        return Event((Atom(p, 1),), (Atom(a, group), Atom(y, 0, policy_do)))
    if name == "FNRP":
        return Event((Atom(p, 1),), (Atom(a, group), Atom(y, 1, policy_do)))
    if name == "PPP":
        return Event((Atom(y, 1, policy_do),), (Atom(a, group), Atom(p, 1)))
    if name == "NPP":
        return Event((Atom(y, 1, policy_do),), (Atom(a, group), Atom(p, 0)))
    raise MetricError(name)


def _difference_terms(name, roles, groups, policy_do=()):
    g0, g1 = groups
    return (
        (Fraction(1), _rate_event(name, roles, g0, policy_do)),
        (Fraction(-1), _rate_event(name, roles, g1, policy_do)),
    )


def metric_events(spec: MetricSpec, groups=(0, 1)):
    """Signed event terms for a metric; pair metrics return two term lists."""
    roles = spec.roles
    a, p = roles.attribute, roles.prediction
    name = spec.name
    if name in ("DP", "FPRP", "FNRP", "PPP", "NPP"):
        return _difference_terms(name, roles, groups)
    if name in ("CF_FPRP", "CF_FNRP", "CF_PPP", "CF_NPP"):
        do = ((roles.policy, 1),)
        return _difference_terms(name.removeprefix("CF_"), roles, groups, do)
    if name == "EO":
        return (
            _difference_terms("FPRP", roles, groups),
            _difference_terms("FNRP", roles, groups),
        )
    if name == "CF_EO":
        do = ((roles.policy, 1),)
        return (
            _difference_terms("FPRP", roles, groups, do),
            _difference_terms("FNRP", roles, groups, do),
        )
    if name == "CF":
        g0, g1 = groups
        return (
            (Fraction(1), Event((Atom(p, 1, ((a, g1),)), Atom(p, 0, ((a, g0),))))),
            (Fraction(1), Event((Atom(p, 0, ((a, g1),)), Atom(p, 1, ((a, g0),))))),
        )
    if name == "TE":
        g0, g1 = groups
        return (
            (Fraction(1), Event((Atom(p, 1, ((a, g1),)),))),
            (Fraction(-1), Event((Atom(p, 1, ((a, g0),)),))),
        )
    if name == "SE":
        g0, g1 = groups
        return (
            (Fraction(1), Event((Atom(p, 1, ((a, g1),)),))),
            (Fraction(-1), Event((Atom(p, 1),), (Atom(a, g1),))),
        )
    if name in RATE_NAMES:
        y = roles.outcome
        g = spec.group
        if name == "FPR":
            return ((Fraction(1), Event((Atom(p, 1),), (Atom(a, g), Atom(y, 0)))),)
        if name == "FNR":
            return ((Fraction(1), Event((Atom(p, 0),), (Atom(a, g), Atom(y, 1)))),)
        return ((Fraction(1), Event((Atom(y, 1),), (Atom(a, g), Atom(p, 1)))),)
    raise MetricError(name)


def metric_terms(spec: MetricSpec, scheme: ResponseScheme):
    """Compile a metric to signed fraction terms ``sum_k c_k * N_k/D_k``.

    Pair metrics (EO, CF_EO) return a tuple of two term lists.
    """
    spec.roles.validate_against(scheme.dag)
    events = metric_events(spec)
    if spec.is_pair:
        return tuple(
            tuple((c, compile_probability(scheme, e)) for c, e in part) for part in events
        )
    return tuple((c, compile_probability(scheme, e)) for c, e in events)


def _combine(terms) -> RationalExpr:
    num = PolynomialExpr()
    den = PolynomialExpr.const(1)
    for coef, frac in terms:
        num = num * frac.den + frac.num.scale(coef) * den
        den = den * frac.den
    return RationalExpr(num, den)


def metric_expression(spec: MetricSpec, scheme: ResponseScheme):
    """Single RationalExpr for scalar metrics; ordered pair for EO/CF_EO."""
    terms = metric_terms(spec, scheme)
    if spec.is_pair:
        return tuple(_combine(part) for part in terms)
    return _combine(terms)


def evaluate_metric(spec: MetricSpec, scheme: ResponseScheme, point, eps_den=1e-9) -> float:
    """Numeric metric value at a scheme point (abs-combined for pairs)."""
    from .events import evaluate

    terms = metric_terms(spec, scheme)
    if spec.is_pair:
        vals = [
            sum(float(c) * evaluate(f, point, eps_den) for c, f in part) for part in terms
        ]
        return max(abs(v) for v in vals)
    value = sum(float(c) * evaluate(f, point, eps_den) for c, f in terms)
    return value if spec.signed else abs(value)


def abs_interval(lo: float, hi: float) -> tuple[float, float]:
    """Interval of |x| for x in [lo, hi]."""
    if lo <= 0.0 <= hi:
        return 0.0, max(abs(lo), abs(hi))
    return min(abs(lo), abs(hi)), max(abs(lo), abs(hi))


# ---------------------------------------------------------------------------
# Plug-in estimates on observed tables
# ---------------------------------------------------------------------------


def _cond(freq, target: dict, given: dict) -> Fraction:
    key = {"a": 0, "y": 1, "p": 2}

    def match(cell, spec_map):
        return all(cell[key[k]] == v for k, v in spec_map.items())

    den = sum((f for c, f in freq.items() if match(c, given)), Fraction(0))
    if den == 0:
        raise MetricError(f"zero-count conditioning cell: {given}")
    num = sum(
        (f for c, f in freq.items() if match(c, given) and match(c, target)), Fraction(0)
    )
    return num / den


def empirical_metric(table: ObservedTable, spec: MetricSpec) -> float:
    """Evaluate an observational metric's measured-as formula on counts."""
    return metric_from_frequencies(table.frequencies(), spec)


def metric_from_frequencies(freq, spec: MetricSpec) -> float:
    """The measured-as formula on an (a, y, p) -> probability mapping."""
    if not spec.is_observational:
        raise MetricError(f"{spec.name} is counterfactual; no plug-in estimate exists")
    if spec.name in RATE_NAMES:
        g = spec.group
        if spec.name == "FPR":
            return float(_cond(freq, {"p": 1}, {"a": g, "y": 0}))
        if spec.name == "FNR":
            return float(_cond(freq, {"p": 0}, {"a": g, "y": 1}))
        return float(_cond(freq, {"y": 1}, {"a": g, "p": 1}))
    if spec.name == "EO":
        fpr = _cond(freq, {"p": 1}, {"a": 0, "y": 0}) - _cond(freq, {"p": 1}, {"a": 1, "y": 0})
        fnr = _cond(freq, {"p": 1}, {"a": 0, "y": 1}) - _cond(freq, {"p": 1}, {"a": 1, "y": 1})
        return float(max(abs(fpr), abs(fnr)))
    if spec.name == "DP":
        value = _cond(freq, {"p": 1}, {"a": 0}) - _cond(freq, {"p": 1}, {"a": 1})
    elif spec.name == "FPRP":
        value = _cond(freq, {"p": 1}, {"a": 0, "y": 0}) - _cond(freq, {"p": 1}, {"a": 1, "y": 0})
    elif spec.name == "FNRP":
        value = _cond(freq, {"p": 1}, {"a": 0, "y": 1}) - _cond(freq, {"p": 1}, {"a": 1, "y": 1})
    elif spec.name == "PPP":
        value = _cond(freq, {"y": 1}, {"a": 0, "p": 1}) - _cond(freq, {"y": 1}, {"a": 1, "p": 1})
    else:  # NPP, conditioning on a negative prediction in both terms
        value = _cond(freq, {"y": 1}, {"a": 0, "p": 0}) - _cond(freq, {"y": 1}, {"a": 1, "p": 0})
    return float(value) if spec.signed else float(abs(value))
