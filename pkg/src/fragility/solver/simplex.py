"""Dense two-phase tableau simplex with exact rational bound certificates.

The pivoting runs in floating point (Dantzig pricing, Bland's rule fallback
against cycling) and returns row duals. Certified bounds never trust the
float solution: ``certified_lower_bound`` re-weighs the rows in exact
rational arithmetic, so any dual vector yields a valid bound and a sloppy
one merely yields a weaker bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "LinearProgram",
    "LPResult",
    "solve_lp",
    "solve_lp_auto",
    "certified_lower_bound",
    "farkas_certifies_infeasible",
]

try:
    from scipy.optimize import linprog as _scipy_linprog
    from scipy.sparse import csr_matrix as _csr
except Exception:  # pragma: no cover - scipy is an install-time dependency
    _scipy_linprog = None

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
BLAND_AFTER = 1500


@dataclass
class LinearProgram:
    """min c.x  s.t.  rows (sense 'le': a.x <= b, 'eq': a.x = b),  lo <= x <= hi.

    Row data live twice: dense floats for pivoting, exact Fractions for the
    certificates (``rows_frac``: (sparse coef dict, rhs, sense)).
    """

    n: int
    c: np.ndarray
    a_rows: list
    b: np.ndarray
    senses: list
    lo: np.ndarray
    hi: np.ndarray
    c_frac: list
    rows_frac: list
    lo_frac: list
    hi_frac: list
    skip_upper: np.ndarray | None = None  # upper-bound rows implied elsewhere


@dataclass
class LPResult:
    status: str  # optimal | infeasible | unbounded | stalled
    x: np.ndarray | None
    obj: float | None
    duals: np.ndarray | None  # per original row
    phase1_duals: np.ndarray | None = None


def _run_simplex(T, basis, n_allowed, tol=PIVOT_TOL):
    """Minimize the last (cost) row in place over columns < n_allowed."""
    m = T.shape[0] - 1
    iters = 0
    max_iters = 4000 + 8 * T.shape[1]
    while True:
        basis_arr = np.asarray(basis)
        iters += 1
        if iters > max_iters:
            return "stalled"
        cost = T[-1, :n_allowed]
        if iters > BLAND_AFTER:
            candidates = np.flatnonzero(cost < -tol)
            if candidates.size == 0:
                return "optimal"
            enter = int(candidates[0])
        else:
            enter = int(np.argmin(cost))
            if cost[enter] >= -tol:
                return "optimal"
        col = T[:m, enter]
        rhs = T[:m, -1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(col > tol, rhs / col, np.inf)
        best = ratios.min(initial=np.inf)
        if not np.isfinite(best):
            return "unbounded"
        ties = np.flatnonzero(ratios <= best + 1e-12)
        leave = int(ties[np.argmin(basis_arr[ties])])
        pivot_row = T[leave] / T[leave, enter]
        factors = T[:, enter].copy()
        T -= np.outer(factors, pivot_row)
        T[leave] = pivot_row
        T[:, enter] = 0.0
        T[leave, enter] = 1.0
        basis[leave] = enter


def solve_lp(lp: LinearProgram) -> LPResult:
    """Two-phase solve. Lower bounds are shifted away; upper bounds are rows."""
    n = lp.n
    lo = np.where(np.isfinite(lp.lo), lp.lo, 0.0)
    width = lp.hi - lo

    rows, senses, b = [], [], []
    for coefs, bi, sense in zip(lp.a_rows, lp.b, lp.senses):
        rows.append(np.asarray(coefs, dtype=float))
        senses.append(sense)
        b.append(float(bi) - float(np.dot(coefs, lo)))
    n_struct = len(rows)
    skip = lp.skip_upper if lp.skip_upper is not None else np.zeros(n, dtype=bool)
    for j in range(n):
        if np.isfinite(width[j]) and width[j] >= 0 and not skip[j]:
            row = np.zeros(n)
            row[j] = 1.0
            rows.append(row)
            senses.append("le")
            b.append(float(width[j]))

    m = len(rows)
    A = np.vstack(rows) if rows else np.zeros((0, n))
    b = np.asarray(b, dtype=float)
    flip = b < 0
    A[flip] *= -1.0
    b = np.where(flip, -b, b)
    flipped_senses = ["ge" if (f and s == "le") else s for f, s in zip(flip, senses)]

    n_slack = sum(1 for s in flipped_senses if s in ("le", "ge"))
    art0 = n + n_slack
    n_cols = art0 + m
    T = np.zeros((m + 1, n_cols + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    si = n
    slack_of = {}
    for i, sense in enumerate(flipped_senses):
        if sense == "le":
            T[i, si] = 1.0
            slack_of[i] = si
            si += 1
        elif sense == "ge":
            T[i, si] = -1.0
            slack_of[i] = si
            si += 1
        T[i, art0 + i] = 1.0

    # slack starts basic where it can; the artificial column stays nonbasic
    # (artificials are never priced) and serves as the dual readout.
    basis = []
    for i in range(m):
        basis.append(slack_of[i] if flipped_senses[i] == "le" else art0 + i)

    # phase 1: minimize the sum of artificial variables
    T[-1, :] = 0.0
    T[-1, art0:n_cols] = 1.0
    for i, bi in enumerate(basis):
        if bi >= art0:
            T[-1] -= T[i]
    status = _run_simplex(T, basis, art0)
    if status == "stalled":
        return LPResult("stalled", None, None, None)
    phase1_duals = _extract_duals(T, art0, m, flip, art_cost=1.0)[:n_struct]
    if -T[-1, -1] > FEAS_TOL:
        return LPResult("infeasible", None, None, None, phase1_duals)

    # drive remaining artificials out of the basis; fully zero rows are inert
    for i in range(m):
        if basis[i] >= art0:
            cand = np.flatnonzero(np.abs(T[i, :art0]) > 1e-7)
            if cand.size:
                enter = int(cand[0])
                pivot_row = T[i] / T[i, enter]
                factors = T[:, enter].copy()
                T -= np.outer(factors, pivot_row)
                T[i] = pivot_row
                T[:, enter] = 0.0
                T[i, enter] = 1.0
                basis[i] = enter

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = lp.c
    for i, bi in enumerate(basis):
        if bi < art0 and abs(T[-1, bi]) > 0:
            T[-1] -= T[-1, bi] * T[i]
    status = _run_simplex(T, basis, art0)
    if status == "stalled":
        return LPResult("stalled", None, None, None)
    if status == "unbounded":
        return LPResult("unbounded", None, None, None)

    duals = _extract_duals(T, art0, m, flip, art_cost=0.0)[:n_struct]
    x = lo.copy()
    for i, bi in enumerate(basis):
        if bi < n:
            x[bi] = lo[bi] + max(T[i, -1], 0.0)
    x = np.clip(x, lp.lo, np.where(np.isfinite(lp.hi), lp.hi, np.inf))
    return LPResult("optimal", x, float(np.dot(lp.c, x)), duals, phase1_duals)


def _extract_duals(T, art0, m, flip, art_cost):
    """Duals read off the artificial columns: entry = art_cost - y_i."""
    y = art_cost - T[-1, art0 : art0 + m]
    return np.where(flip, -y, y)


def _solve_scipy(lp: LinearProgram) -> LPResult:
    """HiGHS-backed solve; bound certificates stay with the exact layer."""
    rows_ub, b_ub, rows_eq, b_eq = [], [], [], []
    ub_idx, eq_idx = [], []
    for i, (coefs, bi, sense) in enumerate(zip(lp.a_rows, lp.b, lp.senses)):
        if sense == "le":
            rows_ub.append(coefs)
            b_ub.append(bi)
            ub_idx.append(i)
        else:
            rows_eq.append(coefs)
            b_eq.append(bi)
            eq_idx.append(i)
    res = _scipy_linprog(
        lp.c,
        A_ub=_csr(np.array(rows_ub)) if rows_ub else None,
        b_ub=np.array(b_ub) if rows_ub else None,
        A_eq=_csr(np.array(rows_eq)) if rows_eq else None,
        b_eq=np.array(b_eq) if rows_eq else None,
        bounds=list(zip(lp.lo, np.where(np.isfinite(lp.hi), lp.hi, None))),
        method="highs",
    )
    if res.status == 2:
        return LPResult("infeasible", None, None, None, None)
    if res.status == 3:
        return LPResult("unbounded", None, None, None, None)
    if res.status != 0:
        return LPResult("stalled", None, None, None, None)
    duals = np.zeros(len(lp.a_rows))
    if rows_ub:
        duals[ub_idx] = res.ineqlin.marginals
    if rows_eq:
        duals[eq_idx] = res.eqlin.marginals
    x = np.clip(res.x, lp.lo, np.where(np.isfinite(lp.hi), lp.hi, np.inf))
    return LPResult("optimal", x, float(np.dot(lp.c, x)), duals, None)


def _scipy_farkas_duals(lp: LinearProgram):
    """Dual candidates for infeasibility from an elastic relaxation.

    Minimizing the total constraint violation yields duals of the hardened
    rows; when the violation optimum is positive these are exactly a Farkas
    ray (up to float noise the exact checker will vet).
    """
    n, m = lp.n, len(lp.a_rows)
    # variables: x (n) then one violation slack per row
    c = np.concatenate([np.zeros(n), np.ones(m)])
    rows_ub, b_ub, ub_idx = [], [], []
    rows_eq, b_eq, eq_idx = [], [], []
    for i, (coefs, bi, sense) in enumerate(zip(lp.a_rows, lp.b, lp.senses)):
        ext = np.zeros(n + m)
        ext[:n] = coefs
        ext[n + i] = -1.0
        if sense == "le":
            rows_ub.append(ext)
            b_ub.append(bi)
            ub_idx.append(i)
        else:
            rows_eq.append(ext)
            b_eq.append(bi)
            eq_idx.append(i)
            down = np.zeros(n + m)
            down[:n] = -np.asarray(coefs)
            down[n + i] = -1.0
            rows_ub.append(down)
            b_ub.append(-bi)
            ub_idx.append(None)
    bounds = list(zip(lp.lo, np.where(np.isfinite(lp.hi), lp.hi, None)))
    bounds += [(0, None)] * m
    res = _scipy_linprog(
        c,
        A_ub=_csr(np.array(rows_ub)) if rows_ub else None,
        b_ub=np.array(b_ub) if rows_ub else None,
        A_eq=_csr(np.array(rows_eq)) if rows_eq else None,
        b_eq=np.array(b_eq) if rows_eq else None,
        bounds=bounds,
        method="highs",
    )
    if res.status != 0 or res.fun is None or res.fun <= 1e-9:
        return None
    duals = np.zeros(m)
    if rows_ub:
        for idx, y in zip(ub_idx, res.ineqlin.marginals):
            if idx is not None:
                duals[idx] += y
    if rows_eq:
        for idx, y in zip(eq_idx, res.eqlin.marginals):
            duals[idx] += y
    return duals


def solve_lp_auto(lp: LinearProgram, backend: str = "auto") -> LPResult:
    """Dispatch to HiGHS for large systems, the in-house tableau otherwise.

    Infeasible HiGHS answers are paired with elastic-relaxation duals so the
    exact Farkas checker can vet the claim; bounds never rely on backend
    correctness.
    """
    big = lp.n >= 160 or len(lp.a_rows) >= 240
    use_scipy = (
        _scipy_linprog is not None
        and backend in ("auto", "scipy")
        and (backend == "scipy" or big)
    )
    if use_scipy:
        res = _solve_scipy(lp)
        if res.status == "infeasible":
            return LPResult("infeasible", None, None, None, _scipy_farkas_duals(lp))
        if res.status == "optimal":
            return res
        if big:
            return res  # in-house tableau is no help at this size
    return solve_lp(lp)


# ---------------------------------------------------------------------------
# Exact certificates
# ---------------------------------------------------------------------------


def _frac(value: float) -> Fraction:
    if not np.isfinite(value):
        return Fraction(0)
    return Fraction(value).limit_denominator(10**12)


def certified_lower_bound(lp: LinearProgram, duals) -> Fraction | None:
    """Exact lower bound on min c.x over the feasible set, from any duals.

    'le'-row duals are clamped nonpositive, the residual r = c - A^T y is
    accumulated exactly, and the bound is y.b + sum_j min(r_j lo_j, r_j hi_j).
    Returns None if an unbounded variable carries nonzero residual.
    """
    if duals is None:
        duals = [0.0] * len(lp.rows_frac)
    r = list(lp.c_frac)
    bound = Fraction(0)
    for (coefs, bi, sense), yi in zip(lp.rows_frac, duals):
        y = _frac(float(yi))
        if sense == "le" and y > 0:
            y = Fraction(0)
        if y == 0:
            continue
        bound += y * bi
        for j, aij in coefs.items():
            r[j] -= y * aij
    for j in range(lp.n):
        rj = r[j]
        if rj == 0:
            continue
        if rj > 0:
            if lp.lo_frac[j] is None:
                return None
            bound += rj * lp.lo_frac[j]
        else:
            if lp.hi_frac[j] is None:
                return None
            bound += rj * lp.hi_frac[j]
    return bound


def farkas_certifies_infeasible(lp: LinearProgram, duals) -> bool:
    """Exact check that a dual ray proves infeasibility over the box.

    With 'le' duals clamped nonpositive every feasible x satisfies
    (sum_i y_i a_i).x >= y.b; if even the box maximum of the left side falls
    short, the feasible set is empty.
    """
    if duals is None:
        return False
    g = {}
    rhs = Fraction(0)
    nonzero = False
    for (coefs, bi, sense), yi in zip(lp.rows_frac, duals):
        y = _frac(float(yi))
        if sense == "le" and y > 0:
            y = Fraction(0)
        if y == 0:
            continue
        nonzero = True
        rhs += y * bi
        for j, aij in coefs.items():
            g[j] = g.get(j, Fraction(0)) + y * aij
    if not nonzero:
        return False
    best = Fraction(0)
    for j, gj in g.items():
        if gj == 0:
            continue
        if gj > 0:
            if lp.hi_frac[j] is None:
                return False
            best += gj * lp.hi_frac[j]
        else:
            if lp.lo_frac[j] is None:
                return False
            best += gj * lp.lo_frac[j]
    return best < rhs
