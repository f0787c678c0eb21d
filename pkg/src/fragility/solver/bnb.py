"""Spatial branch-and-bound over the compiled bilinear form.

Every reported outer bound passes through an exact rational certificate
(dual re-weighing for optimal nodes, Farkas re-checks for pruned ones), so
early termination on node or time budgets still yields valid bounds. Node
order is best-bound-first with FIFO tie-breaks and a fixed seed, making runs
reproducible.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..metrics import abs_interval
from .fastpoly import FastPoly
from .relax import CompiledProgram, Row, build_lp, compile_program, fbbt, natural_start
from .simplex import certified_lower_bound, farkas_certifies_infeasible, solve_lp_auto

__all__ = ["SolverOptions", "BoundsResult", "solve"]


@dataclass
class SolverOptions:
    """Numeric policy for one solve; all defaults favor reproducibility."""

    gap_tol: float = 1e-3
    max_nodes: int = 200_000
    time_budget: float | None = None
    relax_rounds: int = 8
    restarts: int = 3
    seed: int = 0
    threads: int = 1
    lp_backend: str = "auto"  # auto | inhouse | scipy

    def __post_init__(self):
        if self.gap_tol <= 0 or self.max_nodes <= 0 or self.relax_rounds <= 0:
            raise ValueError("solver options must be positive")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time budget must be positive")


@dataclass
class BoundsResult:
    """Certified outer bounds plus the best feasible (inner) values found."""

    lower: float
    upper: float
    incumbent_lo: float | None
    incumbent_hi: float | None
    gap: float
    nodes: int
    status: str  # optimal | budget-exhausted | infeasible
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def finite(value):
            if value is None or not math.isfinite(value):
                return None
            return float(value)

        return {
            "lower": finite(self.lower),
            "upper": finite(self.upper),
            "incumbent_lo": finite(self.incumbent_lo),
            "incumbent_hi": finite(self.incumbent_hi),
            "gap": finite(self.gap),
            "nodes": self.nodes,
            "status": self.status,
        }


class _Evaluator:
    """Fast feasibility / objective evaluation over aggregated points."""

    def __init__(self, cp: CompiledProgram):
        self.cp = cp
        self.eqs = [FastPoly(g) for g in cp.eq_polys]
        self.ineqs = [FastPoly(h) for h in cp.ineq_polys]
        self.parts = [
            [(float(coef), FastPoly(num), FastPoly(den)) for _, coef, num, den in part]
            for part in cp.frac_parts
        ]
        self.eps = cp.program.eps_feas

    def violation(self, x) -> float:
        worst = 0.0
        for g in self.eqs:
            worst = max(worst, abs(g(x)))
        for h in self.ineqs:
            worst = max(worst, h(x))
        for block in self.cp.blocks:
            total = 0.0
            low = 0.0
            for j in block:
                total += x[j]
                low = min(low, x[j])
            worst = max(worst, abs(total - 1.0), -low)
        return worst

    def feasible(self, x) -> bool:
        return self.violation(x) <= self.eps

    def part_value(self, x, part: int):
        total = 0.0
        for coef, num, den in self.parts[part]:
            d = den(x)
            if abs(d) < 1e-9:
                return None
            total += coef * num(x) / d
        return total

    def pair_value(self, x):
        values = []
        for part in range(len(self.parts)):
            v = self.part_value(x, part)
            if v is None:
                return None
            values.append(v)
        return max(abs(v) for v in values)


# ---------------------------------------------------------------------------
# Incumbent search: simplex projection plus pairwise mass-shift descent
# ---------------------------------------------------------------------------


def _project_blocks(cp: CompiledProgram, x) -> np.ndarray:
    full = np.zeros(cp.n_vars)
    for block in cp.blocks:
        vals = np.clip([x[j] for j in block], 0.0, None)
        total = vals.sum()
        if total <= 1e-12:
            vals = np.full(len(block), 1.0 / len(block))
        else:
            vals = vals / total
        for j, v in zip(block, vals):
            full[j] = v
    return full


def _pair_move(evaluator, x, i, j, objective_sign=0.0, part=0, weight=1e5):
    """Best mass shift x_i += s, x_j -= s by exact piecewise-quadratic merit.

    Constraints are affine in s along pair directions (the pair shares a
    block and monomials hold at most one coordinate per block), so the merit
    is piecewise quadratic with hinge breakpoints; an objective pull is
    blended on a small grid when requested.
    """
    s_lo, s_hi = -x[i], x[j]
    if s_hi - s_lo < 1e-14:
        return None
    d = np.zeros_like(x)
    d[i], d[j] = 1.0, -1.0
    x_plus = x + d

    quads = []
    hinges = []
    for g in evaluator.eqs:
        a = g(x)
        quads.append((a, g(x_plus) - a))
    for h in evaluator.ineqs:
        a = h(x)
        hinges.append((a, h(x_plus) - a))

    def merit(s):
        total = 0.0
        for a, b in quads:
            total += (a + b * s) ** 2
        for a, b in hinges:
            v = a + b * s
            if v > 0:
                total += v * v
        return total

    points = {s_lo, s_hi, 0.0}
    interior_breaks = sorted(
        {-a / b for a, b in hinges if abs(b) > 1e-14 and s_lo < -a / b < s_hi}
    )
    segments = [s_lo] + interior_breaks + [s_hi]
    points.update(interior_breaks)
    for left, right in zip(segments, segments[1:]):
        mid = 0.5 * (left + right)
        A = sum(b * b for _, b in quads)
        B = sum(2 * a * b for a, b in quads)
        for a, b in hinges:
            if a + b * mid > 0:
                A += b * b
                B += 2 * a * b
        if A > 1e-14:
            vertex = -B / (2 * A)
            if left < vertex < right:
                points.add(vertex)

    if objective_sign:
        term_lines = []
        for coef, num, den in evaluator.parts[part]:
            an, ad = num(x), den(x)
            term_lines.append((coef, an, num(x_plus) - an, ad, den(x_plus) - ad))

        def score(s):
            value = 0.0
            for coef, an, bn, ad, bd in term_lines:
                dd = ad + bd * s
                if abs(dd) < 1e-9:
                    return math.inf
                value += coef * (an + bn * s) / dd
            return objective_sign * value + weight * merit(s)

        grid = np.linspace(s_lo, s_hi, 13)
        candidates = list(points) + list(grid)
        best_s = min(candidates, key=score)
        if score(best_s) >= score(0.0) - 1e-14:
            return None
        return best_s

    best_s = min(points, key=merit)
    if merit(best_s) >= merit(0.0) - 1e-16:
        return None
    return best_s


def _refine(cp, evaluator, x, rng, objective_sign=0.0, part=0, sweeps=8):
    x = _project_blocks(cp, x)
    for _ in range(sweeps):
        if not objective_sign and evaluator.violation(x) <= evaluator.eps * 0.25:
            break
        moved = False
        for block in cp.blocks:
            if len(block) < 2:
                continue
            for _ in range(min(24, 2 * len(block))):
                i, j = rng.choice(len(block), size=2, replace=False)
                vi, vj = block[i], block[j]
                s = _pair_move(evaluator, x, vi, vj, objective_sign, part)
                if s is not None and abs(s) > 1e-14:
                    x[vi] += s
                    x[vj] -= s
                    moved = True
        if not moved:
            break
    return x


# ---------------------------------------------------------------------------
# Directional branch-and-bound
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, options: SolverOptions, deadline, should_stop):
        self.max_nodes = options.max_nodes
        self.deadline = deadline
        self.should_stop = should_stop
        self.used = 0

    def exhausted(self) -> bool:
        if self.used >= self.max_nodes:
            return True
        if self.deadline is not None and time.monotonic() > self.deadline:
            return True
        return bool(self.should_stop and self.should_stop())


def _interval_bound(cp, objective, lo, hi) -> float:
    terms, const = objective
    low = float(const)
    for j, c in terms:
        c = float(c)
        low += min(c * lo[j], c * hi[j])
    return low


def _form_value(form, x) -> float:
    terms, const = form
    return float(const) + sum(float(c) * x[j] for j, c in terms)


def _certified_min_of(cp, lo, hi, terms, const, options) -> float | None:
    """Exact lower bound of a linear form over the current relaxation."""
    lp, _, folded = build_lp(cp, lo, hi, (tuple(terms), const))
    res = solve_lp_auto(lp, options.lp_backend)
    if res.status != "optimal":
        return None
    cert = certified_lower_bound(lp, res.duals)
    if cert is None:
        return None
    return float(cert + folded) - 1e-12


def _scaled(terms, factor):
    return tuple((j, c * factor) for j, c in terms)


def _root_obbt(cp, options, extra_rows=()):
    """Tighten the shared root box once per compile.

    Runs min/max over a few structural variables, then a certificate-driven
    Dinkelbach pass per objective fraction: while min(N - lam*D) stays
    certifiably nonnegative, lam can grow by cert/D_hi and remains a valid
    lower bound on N/D (given D > 0); symmetrically for the upper end.
    """
    if cp.obbt_done:
        return
    cp.obbt_done = True
    lo, hi = cp.root_lo, cp.root_hi
    if not fbbt(cp, lo, hi, options.relax_rounds * 2, extra_rows):
        return

    targets = []
    for block in cp.blocks:
        if len(block) <= 4:
            targets.extend(block)
    for j in targets:
        for sign in (1, -1):
            value = _certified_min_of(cp, lo, hi, ((j, Fraction(sign)),), Fraction(0), options)
            if value is None:
                continue
            if sign == 1 and value > lo[j]:
                lo[j] = value
            elif sign == -1 and -value < hi[j]:
                hi[j] = -value

    for t, (n_terms, n_const), (d_terms, d_const) in cp.fraction_forms:
        d_lo = _certified_min_of(cp, lo, hi, d_terms, d_const, options)
        neg = _certified_min_of(cp, lo, hi, _scaled(d_terms, Fraction(-1)), -d_const, options)
        d_hi = -neg if neg is not None else None
        if d_lo is None or d_hi is None or d_lo <= 1e-7 or d_hi <= 0:
            continue
        lam = float(lo[t])
        for _ in range(8):
            mix_terms = dict(n_terms)
            flam = Fraction(lam).limit_denominator(10**9)
            for j, c in d_terms:
                mix_terms[j] = mix_terms.get(j, Fraction(0)) - flam * c
            cert = _certified_min_of(
                cp, lo, hi, tuple(mix_terms.items()), n_const - flam * d_const, options
            )
            if cert is None or cert <= 1e-10:
                break
            lam += cert / d_hi
            if not lam < float(hi[t]):
                lam = min(lam, float(hi[t]))
                break
        lo[t] = max(lo[t], lam)
        mu = float(hi[t])
        for _ in range(8):
            fmu = Fraction(mu).limit_denominator(10**9)
            mix_terms = {j: fmu * c for j, c in d_terms}
            for j, c in n_terms:
                mix_terms[j] = mix_terms.get(j, Fraction(0)) - c
            cert = _certified_min_of(
                cp, lo, hi, tuple(mix_terms.items()), fmu * d_const - n_const, options
            )
            if cert is None or cert <= 1e-10:
                break
            mu -= cert / d_hi
            if not mu > float(lo[t]):
                mu = max(mu, float(lo[t]))
                break
        hi[t] = min(hi[t], mu)
    fbbt(cp, lo, hi, options.relax_rounds * 2, extra_rows)


def _negate(objective):
    terms, const = objective
    return tuple((j, -c) for j, c in terms), -const


@dataclass
class _DirectionResult:
    bound: float  # certified lower bound on min(objective)
    best: float | None  # best feasible objective value found
    converged: bool
    infeasible: bool
    nodes: int


def _fraction_objective(cp, objective):
    """(t, n_form, d_form, sign, const) when the objective is one fraction."""
    terms, const = objective
    if len(terms) != 1:
        return None
    t, coef = terms[0]
    if coef not in (1, -1, Fraction(1), Fraction(-1)):
        return None
    for ft, n_form, d_form in cp.fraction_forms:
        if ft == t:
            return t, n_form, d_form, int(coef), const
    return None


def _node_dinkelbach(cp, lo, hi, frac_obj, options, extra_rows, rounds=2):
    """Tighten the node's own t box by certified ratio steps.

    Children inherit the node box, so this pays forward; with sign -1 the
    upper end of N/D shrinks instead.
    """
    t, n_form, d_form, sign, _ = frac_obj
    d_lo, d_hi = _form_interval_boxes(d_form, lo, hi)
    if d_hi <= 1e-9:
        return
    for _ in range(rounds):
        if sign > 0:
            lam = Fraction(float(lo[t])).limit_denominator(10**9)
            mix = {j: -lam * c for j, c in d_form[0]}
            for j, c in n_form[0]:
                mix[j] = mix.get(j, Fraction(0)) + c
            const = n_form[1] - lam * d_form[1]
        else:
            mu = Fraction(float(hi[t])).limit_denominator(10**9)
            mix = {j: mu * c for j, c in d_form[0]}
            for j, c in n_form[0]:
                mix[j] = mix.get(j, Fraction(0)) - c
            const = mu * d_form[1] - n_form[1]
        lp, _, folded = build_lp(cp, lo, hi, (tuple(mix.items()), const), extra_rows)
        res = solve_lp_auto(lp, options.lp_backend)
        if res.status == "infeasible":
            if farkas_certifies_infeasible(lp, res.phase1_duals):
                lo[t] = hi[t] + 1.0  # mark empty; caller's FBBT reports it
            return
        if res.status != "optimal":
            return
        cert = certified_lower_bound(lp, res.duals)
        if cert is None:
            return
        step = float(cert + folded) / d_hi
        if step <= 1e-9:
            return
        if sign > 0:
            lo[t] = min(lo[t] + step, hi[t])
        else:
            hi[t] = max(hi[t] - step, lo[t])


def _form_interval_boxes(form, lo, hi):
    terms, const = form
    f_lo = f_hi = float(const)
    for j, c in terms:
        c = float(c)
        if c > 0:
            f_lo += c * lo[j]
            f_hi += c * hi[j]
        else:
            f_lo += c * hi[j]
            f_hi += c * lo[j]
    return f_lo, f_hi


def _minimize(
    cp: CompiledProgram,
    evaluator: _Evaluator,
    objective,
    value_of,
    options: SolverOptions,
    budget: _Budget,
    pool: list,
    extra_rows=(),
    rng=None,
) -> _DirectionResult:
    rng = rng or np.random.default_rng(options.seed)
    _root_obbt(cp, options)
    lo = cp.root_lo.copy()
    hi = cp.root_hi.copy()
    if not fbbt(cp, lo, hi, options.relax_rounds * 2, extra_rows):
        return _DirectionResult(math.inf, None, True, True, 0)

    best_val = math.inf
    for x in pool:
        v = value_of(x)
        if v is not None and v < best_val:
            best_val = v

    frac_obj = _fraction_objective(cp, objective)
    seq = 0
    heap = [(_interval_bound(cp, objective, lo, hi), seq, lo, hi)]
    closed_bounds: list[float] = []
    nodes = 0

    def try_point(x_agg, effort):
        nonlocal best_val
        candidates = []
        if evaluator.violation(x_agg) <= evaluator.eps:
            candidates.append(np.asarray(x_agg, dtype=float))
        elif effort:
            x = _refine(cp, evaluator, x_agg, rng, sweeps=6)
            candidates.append(x)
            pulled = _refine(cp, evaluator, x.copy(), rng, objective_sign=1.0, sweeps=5)
            candidates.append(_refine(cp, evaluator, pulled, rng, sweeps=4))
        for cand in candidates:
            if evaluator.feasible(cand):
                v = value_of(cand)
                if v is not None:
                    pool.append(cand.copy())
                    if v < best_val:
                        best_val = v

    while heap:
        if heap[0][0] >= best_val - options.gap_tol:
            break
        if budget.exhausted():
            break
        bound, _, lo, hi = heapq.heappop(heap)
        nodes += 1
        budget.used += 1

        if not fbbt(cp, lo, hi, options.relax_rounds, extra_rows):
            closed_bounds.append(math.inf)
            continue
        if frac_obj is not None:
            _node_dinkelbach(cp, lo, hi, frac_obj, options, extra_rows)
            if not fbbt(cp, lo, hi, 2, extra_rows):
                closed_bounds.append(math.inf)
                continue
            t_var = frac_obj[0]
            sign, const = frac_obj[3], float(frac_obj[4])
            direct = const + (lo[t_var] if sign > 0 else -hi[t_var])
            bound = max(bound, direct)
        lp, col_of, folded = build_lp(cp, lo, hi, objective, extra_rows)
        res = solve_lp_auto(lp, options.lp_backend)

        x_full = None
        if res.status == "infeasible":
            if farkas_certifies_infeasible(lp, res.phase1_duals):
                closed_bounds.append(math.inf)
                continue
            node_bound = max(bound, _interval_bound(cp, objective, lo, hi))
        elif res.status == "optimal":
            cert = certified_lower_bound(lp, res.duals)
            if cert is None:
                node_bound = max(bound, _interval_bound(cp, objective, lo, hi))
            else:
                node_bound = max(bound, float(cert + folded) - 1e-12)
            x_full = np.where(col_of >= 0, res.x[np.maximum(col_of, 0)], (lo + hi) / 2)
        else:  # stalled / unbounded: fall back to the interval bound
            node_bound = max(bound, _interval_bound(cp, objective, lo, hi))

        if x_full is not None:
            try_point(x_full, effort=(nodes <= 3 or nodes % 5 == 0))

        if node_bound >= best_val - 1e-15:
            closed_bounds.append(node_bound)
            continue

        branch_var = None
        if x_full is not None:
            worst = 1e-9
            for w, a, b in cp.prods:
                viol = abs(x_full[w] - x_full[a] * x_full[b])
                if viol > worst:
                    cand = a if (hi[a] - lo[a]) >= (hi[b] - lo[b]) else b
                    if hi[cand] - lo[cand] > 1e-9:
                        worst = viol
                        branch_var = cand
            for t, n_form, d_form in cp.fraction_forms:
                d_val = _form_value(d_form, x_full)
                viol = abs(x_full[t] * d_val - _form_value(n_form, x_full))
                if viol > worst and hi[t] - lo[t] > 1e-9:
                    worst = viol
                    branch_var = t
        else:
            widths = hi - lo
            j = int(np.argmax(widths))
            if widths[j] > 1e-9:
                branch_var = j
        if branch_var is None:
            closed_bounds.append(node_bound)  # relaxation exact at this node
            continue

        point = (
            x_full[branch_var]
            if x_full is not None
            else 0.5 * (lo[branch_var] + hi[branch_var])
        )
        width = hi[branch_var] - lo[branch_var]
        split = min(
            max(point, lo[branch_var] + 0.25 * width), hi[branch_var] - 0.25 * width
        )
        for new_lo, new_hi in ((lo[branch_var], split), (split, hi[branch_var])):
            clo, chi = lo.copy(), hi.copy()
            clo[branch_var], chi[branch_var] = new_lo, new_hi
            seq += 1
            heapq.heappush(heap, (node_bound, seq, clo, chi))

    open_bounds = [entry[0] for entry in heap]
    all_bounds = open_bounds + closed_bounds
    lower = min(all_bounds) if all_bounds else math.inf
    converged = (not heap) or heap[0][0] >= best_val - options.gap_tol
    has_best = math.isfinite(best_val)
    if has_best:
        lower = min(lower, best_val)
    infeasible = (not has_best) and (not heap) and lower == math.inf
    return _DirectionResult(lower, best_val if has_best else None, converged, infeasible, nodes)


# ---------------------------------------------------------------------------
# Public solve
# ---------------------------------------------------------------------------


def _seed_pool(cp, evaluator, options, hints, rng) -> list:
    candidates = []
    start = natural_start(cp.program)
    if start is not None:
        candidates.append(cp.aggregate_point(start))
    for hint in hints:
        candidates.append(cp.aggregate_point(np.asarray(hint, dtype=float)))
    for _ in range(options.restarts):
        x = np.zeros(cp.n_vars)
        for block in cp.blocks:
            weights = rng.dirichlet(np.ones(len(block)))
            for j, wv in zip(block, weights):
                x[j] = wv
        candidates.append(x)
    pool = []
    for x in candidates:
        refined = _refine(cp, evaluator, x, rng, sweeps=30)
        if evaluator.feasible(refined):
            pool.append(refined)
    return pool


def solve(program, options: SolverOptions | None = None, hints=(), should_stop=None) -> BoundsResult:
    """Bound a sensitivity program with certified outer bounds.

    ``hints`` are raw scheme points warm-starting the incumbent pool (sweeps
    pass feasible models between budget levels); ``should_stop`` is polled at
    node boundaries for cooperative cancellation.
    """
    options = options or SolverOptions()
    cp = compile_program(program)
    evaluator = _Evaluator(cp)
    rng = np.random.default_rng(options.seed)
    deadline = time.monotonic() + options.time_budget if options.time_budget else None
    make_budget = lambda: _Budget(options, deadline, should_stop)
    pool = _seed_pool(cp, evaluator, options, hints, rng)

    if program.metric.is_pair:
        result = _solve_pair(cp, evaluator, options, make_budget, pool, rng)
    else:
        result = _solve_scalar(cp, evaluator, options, make_budget, pool, rng)

    if not program.metric.signed and not program.metric.is_pair:
        lower, upper = abs_interval(result.lower, result.upper)
        inc = [abs(v) for v in (result.incumbent_lo, result.incumbent_hi) if v is not None]
        result.lower, result.upper = lower, upper
        result.incumbent_lo = min(inc) if inc else None
        result.incumbent_hi = max(inc) if inc else None
        result.gap = _gap(result)
    result.meta["points"] = [cp.lift_point(x) for x in pool[-64:]]
    result.meta["total_dim"] = program.scheme.total_dim
    result.meta["compiled_vars"] = cp.n_vars
    return result


def _gap(result: BoundsResult) -> float:
    if result.incumbent_lo is None or result.incumbent_hi is None:
        return math.inf
    return max(result.upper - result.incumbent_hi, result.incumbent_lo - result.lower)


def _clamp_incumbents(lower, upper, values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    inc_lo = min(max(min(values), lower), upper)
    inc_hi = max(min(max(values), upper), lower)
    return inc_lo, inc_hi


def _solve_scalar(cp, evaluator, options, make_budget, pool, rng) -> BoundsResult:
    program = cp.program
    objective = cp.objective_parts[0]

    def value(x):
        return evaluator.part_value(x, 0)

    def neg_value(x):
        v = evaluator.part_value(x, 0)
        return None if v is None else -v

    run_min = program.sense in ("min", "both")
    run_max = program.sense in ("max", "both")

    lower = _interval_bound(cp, objective, cp.root_lo, cp.root_hi)
    upper = -_interval_bound(cp, _negate(objective), cp.root_lo, cp.root_hi)
    converged_min = converged_max = True
    infeasible = False
    nodes = 0

    if run_min:
        res = _minimize(cp, evaluator, objective, value, options, make_budget(), pool, rng=rng)
        lower = res.bound
        converged_min = res.converged
        infeasible = infeasible or res.infeasible
        nodes += res.nodes
    if run_max:
        res = _minimize(cp, evaluator, _negate(objective), neg_value, options, make_budget(), pool, rng=rng)
        upper = -res.bound
        converged_max = res.converged
        infeasible = infeasible or res.infeasible
        nodes += res.nodes

    values = [v for v in (value(x) for x in pool) if v is not None]
    inc_lo, inc_hi = _clamp_incumbents(lower, upper, values)
    result = BoundsResult(lower, upper, inc_lo, inc_hi, 0.0, nodes, "optimal")
    result.gap = _gap(result)
    if infeasible and not values:
        result.status = "infeasible"
        result.gap = math.inf
    elif not (converged_min and converged_max):
        result.status = "budget-exhausted"
    return result


def _solve_pair(cp, evaluator, options, make_budget, pool, rng) -> BoundsResult:
    """Equalized-odds style objectives: bound max(|d1|, |d2|).

    Upper: per part, certified min and max, absolute-combined, worst part
    wins. Lower: minimize an epigraph variable over the four sign quadrants
    (z >= s_i d_i, s_i d_i >= 0); the feasible set is the union of quadrants.
    """
    part_bounds = []
    nodes = 0
    infeasible = False
    converged = True
    for part in (0, 1):
        objective = cp.objective_parts[part]

        def value(x, p=part):
            return evaluator.part_value(x, p)

        def neg_value(x, p=part):
            v = evaluator.part_value(x, p)
            return None if v is None else -v

        res_min = _minimize(cp, evaluator, objective, value, options, make_budget(), pool, rng=rng)
        res_max = _minimize(
            cp, evaluator, _negate(objective), neg_value, options, make_budget(), pool, rng=rng
        )
        nodes += res_min.nodes + res_max.nodes
        infeasible = infeasible or res_min.infeasible or res_max.infeasible
        converged = converged and res_min.converged and res_max.converged
        part_bounds.append((res_min.bound, -res_max.bound))

    upper = max(abs_interval(*pb)[1] for pb in part_bounds)

    epi = cp.epi_var
    lower = math.inf
    any_quadrant_feasible = False
    for s1 in (1, -1):
        for s2 in (1, -1):
            extra = []
            for part, sgn in ((0, s1), (1, s2)):
                terms, const = cp.objective_parts[part]
                extra.append(
                    Row(tuple((j, -sgn * c) for j, c in terms), -sgn * const,
                        None, Fraction(0), "quad")
                )
                extra.append(
                    Row(tuple((j, sgn * c) for j, c in terms) + ((epi, Fraction(-1)),),
                        sgn * const, None, Fraction(0), "epi")
                )
            res = _minimize(
                cp,
                evaluator,
                (((epi, Fraction(1)),), Fraction(0)),
                lambda x: evaluator.pair_value(x),
                options,
                make_budget(),
                pool,
                extra_rows=tuple(extra),
                rng=rng,
            )
            nodes += res.nodes
            if not res.infeasible:
                any_quadrant_feasible = True
                lower = min(lower, res.bound)
            converged = converged and (res.converged or res.infeasible)
    if not any_quadrant_feasible:
        infeasible = True
        lower = 0.0
    lower = max(lower, 0.0)

    values = [v for v in (evaluator.pair_value(x) for x in pool) if v is not None]
    inc_lo, inc_hi = _clamp_incumbents(lower, upper, values)
    result = BoundsResult(lower, upper, inc_lo, inc_hi, 0.0, nodes, "optimal")
    result.gap = _gap(result)
    if infeasible and not values:
        result.status = "infeasible"
        result.gap = math.inf
    elif not converged:
        result.status = "budget-exhausted"
    return result
