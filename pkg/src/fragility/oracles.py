"""Independent references used to validate the solver.

Closed-form proxy-bias bounds, nearest-fair projections with f-divergence
test statistics, the interpretable shift basis over the 8-cell joint, the
minimum-budget-to-flip search, and samplers that construct feasible models
directly (data-consistent by construction) for soundness checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .metrics import MetricSpec, metric_from_frequencies

__all__ = [
    "OracleError",
    "ProxyTable",
    "proxy_closed_form",
    "Dist8",
    "DIST8_CELLS",
    "fair_projection",
    "f_divergence",
    "shift_basis",
    "apply_shift",
    "l1_proxy_budget",
    "min_flip_budget",
    "brute_force_envelope",
    "sample_proxy_models",
    "sample_selection_models",
    "sample_ecp_models",
]


class OracleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Closed-form proxy bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProxyTable:
    """One group slice: p_ij = P(proxy=i, prediction=j | A=a), plus the
    budget alpha = P(true=1, proxy=0 | A=a)."""

    p00: float
    p01: float
    p10: float
    p11: float
    alpha: float

    def __post_init__(self):
        cells = (self.p00, self.p01, self.p10, self.p11)
        if min(cells) < -1e-12:
            raise OracleError("negative cell probability")
        if abs(sum(cells) - 1.0) > 1e-9:
            raise OracleError("cells must sum to one")
        if not 0.0 <= self.alpha <= self.p00 + self.p01 + 1e-12:
            raise OracleError("alpha outside [0, p00 + p01]")


def _c1_interval(t: ProxyTable, metric: str) -> tuple[float, float]:
    """Regime P(proxy=1 | true=0) = 0 with prediction independent of the
    proxy given the true outcome.

    Under that independence the misreported mass splits in proportion to the
    prediction: a_j = alpha * p1j / (p10 + p11); the printed form of the FPR
    numerator in the source derivation uses p10, which contradicts its own
    a_1 formula - the consistent substitution (p11) is used here.
    """
    plus = t.p10 + t.p11
    if metric == "FNR":
        if plus <= 0:
            raise OracleError("p10 + p11 = 0: false negative rate undefined")
        value = t.p10 / plus
        return value, value
    if metric == "FPR":
        if plus <= 0 or t.p00 + t.p01 <= t.alpha:
            raise OracleError("division by zero in the FPR bound")
        at_zero = t.p01 / (t.p00 + t.p01)
        at_alpha = (t.p01 - t.alpha * t.p11 / plus) / (t.p00 + t.p01 - t.alpha)
        return min(at_zero, at_alpha), max(at_zero, at_alpha)
    if metric == "PPV":
        if t.p01 + t.p11 <= 0 or plus <= 0:
            raise OracleError("division by zero in the PPV bound")
        at_zero = t.p11 / (t.p01 + t.p11)
        at_alpha = (t.p11 + t.alpha * t.p11 / plus) / (t.p01 + t.p11)
        return min(at_zero, at_alpha), max(at_zero, at_alpha)
    raise OracleError(f"unknown statistic {metric!r}")


def proxy_closed_form(table: ProxyTable, metric: str, regime: str = "C1") -> tuple[float, float]:
    """Bounds on the true-group rate given the observed proxy slice.

    ``regime='C1'`` assumes the proxy never reads 1 when the truth is 0 (the
    false negative rate is identified); ``regime='C2'`` is the mirrored
    assumption handled by flipping all three binary labels, identifying the
    false positive rate instead.
    """
    if regime == "C1":
        return _c1_interval(table, metric)
    if regime != "C2":
        raise OracleError(f"unknown regime {regime!r}")
    flipped = ProxyTable(table.p11, table.p10, table.p01, table.p00, table.alpha)
    if metric == "FPR":  # identified: equals the observed proxy FPR
        lo, hi = _c1_interval(flipped, "FNR")
        return lo, hi
    if metric == "FNR":
        return _c1_interval(flipped, "FPR")
    raise OracleError("the flip construction covers FPR and FNR only")


# ---------------------------------------------------------------------------
# Fair projections and divergences over the 8-cell joint
# ---------------------------------------------------------------------------

# printed vector order: A=1 block first, prediction before outcome
DIST8_CELLS = (
    (1, 1, 1), (1, 1, 0), (1, 0, 1), (1, 0, 0),
    (0, 1, 1), (0, 1, 0), (0, 0, 1), (0, 0, 0),
)


class Dist8:
    """Joint distribution over (A, prediction, outcome), printed order."""

    __slots__ = ("p",)

    def __init__(self, values):
        p = np.asarray(values, dtype=float)
        if p.shape != (8,):
            raise OracleError("a Dist8 has exactly 8 entries")
        if p.min() < -1e-12 or abs(p.sum() - 1.0) > 1e-9:
            raise OracleError("entries must be a probability vector")
        self.p = np.clip(p, 0.0, None)

    def __iter__(self):
        return iter(self.p)

    def __getitem__(self, i):
        return self.p[i]

    def cell(self, a, yhat, y) -> float:
        return self.p[DIST8_CELLS.index((a, yhat, y))]

    def marginal(self, a=None, yhat=None, y=None) -> float:
        total = 0.0
        for (ca, cyh, cy), value in zip(DIST8_CELLS, self.p):
            if a is not None and ca != a:
                continue
            if yhat is not None and cyh != yhat:
                continue
            if y is not None and cy != y:
                continue
            total += value
        return total

    def smoothed(self, eps: float = 1e-9) -> "Dist8":
        q = self.p + eps
        return Dist8(q / q.sum())


def fair_projection(p: Dist8, criterion: str) -> Dist8:
    """Closest distribution satisfying the parity independence, closed form.

    DP:  Q(a,y,yh) = P(y | a,yh) P(a) P(yh)
    PVP: Q = P(y,yh) P(a,yh) / P(yh)
    EO:  Q = P(yh,y) P(a,y) / P(y)
    """
    out = np.zeros(8)
    for i, (a, yh, y) in enumerate(DIST8_CELLS):
        if criterion == "DP":
            den = p.marginal(a=a, yhat=yh)
            if den <= 0:
                raise OracleError("null conditioning cell; smooth the input first")
            out[i] = (p.cell(a, yh, y) / den) * p.marginal(a=a) * p.marginal(yhat=yh)
        elif criterion == "PVP":
            den = p.marginal(yhat=yh)
            if den <= 0:
                raise OracleError("null conditioning cell; smooth the input first")
            out[i] = p.marginal(yhat=yh, y=y) * p.marginal(a=a, yhat=yh) / den
        elif criterion == "EO":
            den = p.marginal(y=y)
            if den <= 0:
                raise OracleError("null conditioning cell; smooth the input first")
            out[i] = p.marginal(yhat=yh, y=y) * p.marginal(a=a, y=y) / den
        else:
            raise OracleError(f"unknown criterion {criterion!r}")
    return Dist8(out / out.sum() if abs(out.sum() - 1) > 1e-12 else out)


def f_divergence(p, q, kind: str = "chi2") -> float:
    """D_f(p, q) = sum_i q_i f(p_i / q_i); chi2 f(x)=(x-1)^2, tv f(x)=|x-1|."""
    p = np.asarray(list(p), dtype=float)
    q = np.asarray(list(q), dtype=float)
    if p.shape != q.shape:
        raise OracleError("shape mismatch")
    total = 0.0
    for pi, qi in zip(p, q):
        if qi <= 0.0:
            if pi > 0.0:
                return math.inf
            continue
        x = pi / qi
        total += qi * ((x - 1.0) ** 2 if kind == "chi2" else abs(x - 1.0))
    return total


# ---------------------------------------------------------------------------
# Shift basis over the 8-cell joint
# ---------------------------------------------------------------------------


def shift_basis() -> tuple[np.ndarray, ...]:
    """The seven zero-sum directions: P(A), P(Yhat|A) x2, P(Y|Yhat,A) x4."""
    v0 = np.array([0.25] * 4 + [-0.25] * 4)
    v1 = np.array([0.5, 0.5, -0.5, -0.5, 0, 0, 0, 0])
    v2 = np.array([0, 0, 0, 0, 0.5, 0.5, -0.5, -0.5])
    v3 = np.array([1.0, -1.0, 0, 0, 0, 0, 0, 0])
    v4 = np.array([0, 0, 1.0, -1.0, 0, 0, 0, 0])
    v5 = np.array([0, 0, 0, 0, 1.0, -1.0, 0, 0])
    v6 = np.array([0, 0, 0, 0, 0, 0, 1.0, -1.0])
    return (v0, v1, v2, v3, v4, v5, v6)


def apply_shift(p: Dist8, lam) -> Dist8:
    """q = p + sum_k lam_k v_k; rejects coefficients that leave the simplex."""
    lam = np.asarray(list(lam), dtype=float)
    if lam.shape != (7,):
        raise OracleError("expected 7 shift coefficients")
    q = np.array(p.p)
    for coef, v in zip(lam, shift_basis()):
        q = q + coef * v
    for i, value in enumerate(q):
        if value < -1e-12 or value > 1.0 + 1e-12:
            raise OracleError(
                f"shift drives cell {DIST8_CELLS[i]} to {value:.4g}, outside [0, 1]"
            )
    return Dist8(np.clip(q, 0.0, 1.0))


def l1_proxy_budget(lam) -> float:
    """|lam_{a,yhat}|_1 over the four outcome-shift coefficients: the proxy
    noise level P(proxy != truth) this shift spends."""
    lam = np.asarray(list(lam), dtype=float)
    return float(np.abs(lam[3:7]).sum())


# ---------------------------------------------------------------------------
# Minimum budget to flip a test statistic
# ---------------------------------------------------------------------------


def _project_simplex(x: np.ndarray) -> np.ndarray:
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(x) + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.clip(x - theta, 0.0, None)


def _penalized_min(statistic, p, t, b, rng, restarts=6, iters=300, ball=False):
    best = math.inf
    k = len(p)

    def objective(q):
        dist2 = float(np.dot(q - p, q - p))
        gap = max(0.0, dist2 - b * b) if ball else (dist2 - b * b)
        return (statistic(q) - t) ** 2 + gap ** 2

    for r in range(restarts):
        q = _project_simplex(p + 0.3 * rng.standard_normal(k)) if r else p.copy()
        step = 0.05
        obj = objective(q)
        for _ in range(iters):
            grad = np.zeros(k)
            h = 1e-6
            for j in range(k):  # plain forward differences, projection at step
                qj = q.copy()
                qj[j] += h
                grad[j] = (objective(qj) - obj) / h
            q_new = _project_simplex(q - step * grad)
            obj_new = objective(q_new)
            if obj_new < obj:
                q, obj = q_new, obj_new
                step = min(step * 1.3, 0.5)
            else:
                step *= 0.5
                if step < 1e-10:
                    break
        best = min(best, obj)
        if best <= 1e-12:
            break
    return best


def min_flip_budget(p, statistic, threshold: float, seed: int = 0,
                    tol: float = 1e-8, resolution: float = 1e-4) -> float:
    """Smallest L2 distance b at which some simplex point reaches the
    threshold.

    Solved as a sequence of penalized feasibility problems in b. Restricting
    to the ball (a hinge on the distance term) makes feasibility
    upward-closed, so bisection applies; at the returned minimum the witness
    sits on the sphere, which is the regime the sphere-equality formulation
    describes.
    """
    p = np.asarray(list(p), dtype=float)
    if abs(p.sum() - 1.0) > 1e-9 or p.min() < -1e-12:
        raise OracleError("p must lie in the simplex")
    if threshold < 0:
        raise OracleError("threshold must be nonnegative")
    if statistic(p) >= threshold:
        return 0.0
    rng = np.random.default_rng(seed)

    def feasible(b):
        return _penalized_min(statistic, p, threshold, b, rng, ball=True) <= tol

    b_lo, b_hi = 0.0, math.sqrt(2.0)
    if not feasible(b_hi):
        raise OracleError("threshold unreachable within the simplex")
    while b_hi - b_lo > resolution:
        mid = 0.5 * (b_lo + b_hi)
        if feasible(mid):
            b_hi = mid
        else:
            b_lo = mid
    return float(b_hi)


# ---------------------------------------------------------------------------
# Rejection-sampling envelope over a compiled program
# ---------------------------------------------------------------------------


def brute_force_envelope(program, samples: int = 10000, seed: int = 0):
    """Inner interval from uniform Dirichlet rejection sampling.

    Uniform per-block points rarely satisfy data equalities, so this is the
    right tool for budget-only programs; the report carries the keep rate so
    callers can see when rejection is hopeless.
    """
    from .solver.fastpoly import FastPoly
    from .metrics import metric_terms

    scheme = program.scheme
    rng = np.random.default_rng(seed)
    eqs = [FastPoly(g) for g in program.equalities]
    ineqs = [FastPoly(h) for h in program.inequalities]
    parts = program.objective_terms if program.metric.is_pair else (program.objective_terms,)
    fracs = [[(float(c), FastPoly(f.num), FastPoly(f.den)) for c, f in part] for part in parts]
    pinned = set(program.pinned)

    kept_values = []
    kept = 0
    batch = 512
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        done += n
        X = np.zeros((n, scheme.total_dim))
        for block in scheme.blocks:
            idx = [
                i for i in range(block.offset, block.offset + block.dim) if i not in pinned
            ]
            X[:, idx] = rng.dirichlet(np.ones(len(idx)), size=n)
        ok = np.ones(n, dtype=bool)
        for g in eqs:
            ok &= np.abs(g.many(X)) <= program.eps_feas
        for h in ineqs:
            ok &= h.many(X) <= program.eps_feas
        for x in X[ok]:
            values = []
            defined = True
            for part in fracs:
                total = 0.0
                for c, num, den in part:
                    d = den(x)
                    if abs(d) < 1e-9:
                        defined = False
                        break
                    total += c * num(x) / d
                if not defined:
                    break
                values.append(total)
            if not defined:
                continue
            kept += 1
            if program.metric.is_pair:
                kept_values.append(max(abs(v) for v in values))
            else:
                v = values[0]
                kept_values.append(v if program.metric.signed else abs(v))
    if not kept_values:
        return {"kept": 0, "keep_rate": 0.0, "min": None, "max": None}
    return {
        "kept": kept,
        "keep_rate": kept / samples,
        "min": float(min(kept_values)),
        "max": float(max(kept_values)),
    }


# ---------------------------------------------------------------------------
# Constructive feasible-model samplers (data-consistent by construction)
# ---------------------------------------------------------------------------


def _spec_value(freq, spec: MetricSpec) -> float:
    try:
        return metric_from_frequencies(freq, spec)
    except Exception:
        return math.nan


def sample_proxy_models(table, delta: float, spec: MetricSpec, n: int, seed: int = 0):
    """Feasible proxy-bias models: the observed (A, proxy, Yhat) joint is
    kept exactly, the truth given the observables is random, and the
    disagreement mass is scaled into the budget."""
    rng = np.random.default_rng(seed)
    f = {cell: float(v) for cell, v in table.frequencies().items()}
    values = []
    for _ in range(n):
        q = {cell: rng.beta(1.0, 1.0) for cell in f}  # P(true=1 | a, proxy, yhat)
        err = sum(
            f[(a, y, p)] * (q[(a, y, p)] if y == 0 else 1.0 - q[(a, y, p)])
            for (a, y, p) in f
        )
        target = rng.uniform(0.0, delta) if delta > 0 else 0.0
        scale = 0.0 if err <= 0 else min(1.0, target / err)
        joint = {}
        for (a, y, p), mass in f.items():
            q1 = q[(a, y, p)]
            if y == 1:
                z1 = 1.0 - scale * (1.0 - q1)
            else:
                z1 = scale * q1
            joint[(a, 1, p)] = joint.get((a, 1, p), 0.0) + mass * z1
            joint[(a, 0, p)] = joint.get((a, 0, p), 0.0) + mass * (1.0 - z1)
        values.append(_spec_value(joint, spec))
    return np.array(values)


def sample_selection_models(table, delta: float, spec: MetricSpec, n: int, seed: int = 0):
    """Feasible selection models: observed cells hold conditional on S=1 with
    P(S=1) >= 1 - delta; the unselected slice is arbitrary."""
    rng = np.random.default_rng(seed)
    f = {cell: float(v) for cell, v in table.frequencies().items()}
    cells = sorted(f)
    values = []
    for _ in range(n):
        r = 1.0 - rng.uniform(0.0, delta) if delta > 0 else 1.0
        hidden = rng.dirichlet(np.ones(len(cells)))
        joint = {
            cell: r * f[cell] + (1.0 - r) * hidden[i] for i, cell in enumerate(cells)
        }
        values.append(_spec_value(joint, spec))
    return np.array(values)


def sample_ecp_models(table, delta: float, spec: MetricSpec, n: int, seed: int = 0):
    """Feasible monotone-policy models with ATE <= delta.

    The observed outcome is the potential outcome under the sampled policy
    value; the unobserved side respects monotonicity, with effect mass
    scaled into the budget. Returns counterfactual metric values computed on
    the Y(policy=1) joint when ``spec`` is a CF metric.
    """
    rng = np.random.default_rng(seed)
    f = {cell: float(v) for cell, v in table.frequencies().items()}
    base = MetricSpec(spec.name.removeprefix("CF_"), spec.roles, spec.signed, spec.group) \
        if spec.name.startswith("CF_") else spec
    values = []
    for _ in range(n):
        t_prob = {cell: rng.beta(1.0, 1.0) for cell in f}
        up = {cell: rng.beta(1.0, 1.0) for cell in f}   # P(y1=1 | t=0, y=0, ...)
        down = {cell: rng.beta(1.0, 1.0) for cell in f}  # P(y0=0 | t=1, y=1, ...)
        ate = sum(
            f[c] * (
                t_prob[c] * (c[1] == 1) * down[c]
                + (1.0 - t_prob[c]) * (c[1] == 0) * up[c]
            )
            for c in f
        )
        target = rng.uniform(0.0, delta) if delta > 0 else 0.0
        scale = 0.0 if ate <= 0 else min(1.0, target / ate)
        joint_y1 = {}
        for (a, y, p), mass in f.items():
            pt = t_prob[(a, y, p)]
            # t = 1: y1 = y;  t = 0: y1 = y or flips up from 0 with scaled prob
            y1_is_1 = pt * y + (1.0 - pt) * (y + (1 - y) * scale * up[(a, y, p)])
            joint_y1[(a, 1, p)] = joint_y1.get((a, 1, p), 0.0) + mass * y1_is_1
            joint_y1[(a, 0, p)] = joint_y1.get((a, 0, p), 0.0) + mass * (1.0 - y1_is_1)
        if spec.name.startswith("CF_"):
            values.append(_spec_value(joint_y1, base))
        else:
            values.append(_spec_value(f, base))
    return np.array(values)
