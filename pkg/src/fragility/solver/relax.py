"""Compilation of sensitivity programs into box-constrained bilinear form.

Three exact reductions happen before any relaxation:

* pinned coordinates are substituted out;
* coordinates of a block that enter every polynomial identically are
  aggregated into a single variable (mass between them is interchangeable);
* each polynomial is factored into shared linear-combination variables and
  bilinear products, so constraints become linear over (coords, aux).

Bilinear products are the only nonconvexity left; per node they are outer
approximated by McCormick envelopes over the current boxes, and feasibility
based bound tightening (FBBT) shrinks boxes both ways.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..events import PolynomialExpr
from .simplex import LinearProgram

__all__ = ["CompiledProgram", "compile_program", "fbbt", "build_lp", "natural_start"]

OUT_EPS = 1e-12


@dataclass
class Row:
    """lo <= terms.x + const <= hi (None side = unbounded)."""

    terms: tuple
    const: Fraction
    lo: Fraction | None
    hi: Fraction | None
    tag: str = ""


@dataclass
class CompiledProgram:
    program: object
    n_vars: int = 0
    kinds: list = field(default_factory=list)
    names: list = field(default_factory=list)
    root_lo: np.ndarray | None = None
    root_hi: np.ndarray | None = None
    blocks: list = field(default_factory=list)  # per block: list of agg var ids
    members: list = field(default_factory=list)  # per agg coord var: raw coords
    agg_of: dict = field(default_factory=dict)
    prods: list = field(default_factory=list)  # (w, a, b)
    lindefs: list = field(default_factory=list)  # (v, terms, const)
    rows: list = field(default_factory=list)
    objective_parts: list = field(default_factory=list)  # per part: (terms, const)
    frac_parts: list = field(default_factory=list)  # per part: [(coef, num, den)] agg polys
    eq_polys: list = field(default_factory=list)
    ineq_polys: list = field(default_factory=list)
    n_coord_vars: int = 0
    epi_var: int | None = None
    fraction_forms: list = field(default_factory=list)  # (t, n_form, d_form)
    obbt_done: bool = False
    n_joint_vars: int = 0  # joint-lifting variables appended after all others

    # -- point conversions -------------------------------------------------

    def aggregate_point(self, raw: np.ndarray) -> np.ndarray:
        x = np.zeros(self.n_vars)
        for agg, members in enumerate(self.members):
            x[agg] = float(sum(raw[m] for m in members))
        return x

    def lift_point(self, agg: np.ndarray) -> np.ndarray:
        raw = np.zeros(self.program.scheme.total_dim)
        for a, members in enumerate(self.members):
            share = agg[a] / len(members)
            for m in members:
                raw[m] = share
        return raw

    def complete_point(self, x: np.ndarray) -> np.ndarray:
        """Fill t/lin/prod variables consistently with the coord entries.

        Definitions only reference earlier variable ids, so one pass in id
        order settles everything.
        """
        x = x.copy()
        for terms in self.frac_parts:
            for t_var, _, num, den in terms:
                if t_var is None:
                    continue
                d = den.evaluate(x)
                x[t_var] = num.evaluate(x) / d if abs(d) > 1e-12 else 0.0
        defs = [(v, ("lin", terms, const)) for v, terms, const in self.lindefs]
        defs += [(w, ("prod", a, b)) for w, a, b in self.prods]
        for v, spec in sorted(defs):
            if spec[0] == "lin":
                _, terms, const = spec
                x[v] = float(const) + sum(float(c) * x[j] for j, c in terms)
            else:
                _, a, b = spec
                x[v] = x[a] * x[b]
        return x

    # -- feasibility and objective ------------------------------------------

    def violation(self, x_agg: np.ndarray) -> float:
        worst = 0.0
        for g in self.eq_polys:
            worst = max(worst, abs(g.evaluate(x_agg)))
        for h in self.ineq_polys:
            worst = max(worst, h.evaluate(x_agg))
        for block in self.blocks:
            worst = max(worst, abs(sum(x_agg[j] for j in block) - 1.0))
            worst = max(worst, max(0.0, -min(x_agg[j] for j in block)))
        return worst

    def objective_value(self, x_agg: np.ndarray, part: int = 0, eps_den: float = 1e-9):
        total = 0.0
        for _, coef, num, den in self.frac_parts[part]:
            d = den.evaluate(x_agg)
            if abs(d) < eps_den:
                return None
            total += float(coef) * num.evaluate(x_agg) / d
        return total


def _drop_pinned(poly: PolynomialExpr, pinned: set) -> PolynomialExpr:
    if not pinned:
        return poly
    out = PolynomialExpr()
    for mono, c in poly.terms.items():
        if not any(i in pinned for i in mono):
            out.terms[mono] = c
    return out


def compile_program(program) -> CompiledProgram:
    scheme = program.scheme
    pinned = set(program.pinned)
    cp = CompiledProgram(program)

    eqs = [_drop_pinned(g, pinned) for g in program.equalities]
    ineqs = [_drop_pinned(h, pinned) for h in program.inequalities]
    parts = program.objective_terms if program.metric.is_pair else (program.objective_terms,)
    frac_raw = [
        [(coef, _drop_pinned(f.num, pinned), _drop_pinned(f.den, pinned)) for coef, f in part]
        for part in parts
    ]

    # --- signatures over every polynomial the program can see --------------
    families = list(eqs) + list(ineqs)
    for part in frac_raw:
        for _, num, den in part:
            families.append(num)
            families.append(den)

    signature = {}
    for fam_id, poly in enumerate(families):
        for mono, c in poly.terms.items():
            seen_here = set()
            for pos, coord in enumerate(mono):
                if coord in seen_here:
                    continue
                seen_here.add(coord)
                rest = mono[:pos] + mono[pos + 1 :]
                signature.setdefault(coord, []).append((fam_id, rest, c))
    classes: dict = {}
    for block_i, block in enumerate(scheme.blocks):
        for coord in range(block.offset, block.offset + block.dim):
            if coord in pinned:
                continue
            sig = tuple(sorted(signature.get(coord, ()), key=repr))
            classes.setdefault((block_i, sig), []).append(coord)

    ordered = sorted(classes.items(), key=lambda kv: (kv[0][0], kv[1][0]))
    block_vars: dict[int, list[int]] = {}
    for agg_id, ((block_i, _), members) in enumerate(ordered):
        cp.members.append(sorted(members))
        cp.names.append(f"z{agg_id}[{scheme.coord_label(members[0])}{'+' if len(members) > 1 else ''}]")
        cp.kinds.append("coord")
        for m in members:
            cp.agg_of[m] = agg_id
        block_vars.setdefault(block_i, []).append(agg_id)
    cp.n_coord_vars = len(cp.members)
    cp.blocks = [block_vars[i] for i in sorted(block_vars)]

    def rewrite(poly: PolynomialExpr) -> PolynomialExpr:
        out = PolynomialExpr()
        for mono, c in poly.terms.items():
            key = tuple(sorted(cp.agg_of[i] for i in mono))
            prev = out.terms.get(key)
            if prev is None:
                out.terms[key] = c
            elif prev != c:
                raise AssertionError("aggregation signature mismatch")
        return out

    cp.eq_polys = [rewrite(g) for g in eqs]
    cp.ineq_polys = [rewrite(h) for h in ineqs]

    lo = [0.0] * cp.n_coord_vars
    hi = [1.0] * cp.n_coord_vars

    def new_var(kind, name, vlo, vhi) -> int:
        cp.kinds.append(kind)
        cp.names.append(name)
        lo.append(vlo)
        hi.append(vhi)
        return len(cp.kinds) - 1

    # --- objective fractions: epigraph variables ---------------------------
    # Each conditional probability N/D gets a variable t in [0,1]; instead of
    # a bilinear coupling we add per-node secant rows N - t_lo*D >= 0 and
    # N - t_hi*D <= 0 (valid since D >= 0) and branch on t.
    fraction_terms = []  # (t_var, num, den) pending linear-form extraction
    for part_id, part in enumerate(frac_raw):
        compiled_terms = []
        for term_id, (coef, num_raw, den_raw) in enumerate(part):
            num, den = rewrite(num_raw), rewrite(den_raw)
            if den == PolynomialExpr.const(1) and num.degree() <= 1:
                compiled_terms.append((None, coef, num, den))
                continue
            t = new_var("t", f"t{part_id}_{term_id}", 0.0, 1.0)
            fraction_terms.append((t, num, den))
            compiled_terms.append((t, coef, num, den))
        cp.frac_parts.append(compiled_terms)
    if program.metric.is_pair:
        cp.epi_var = new_var("t", "eo_epi", 0.0, 1.0)

    # --- factoring ----------------------------------------------------------
    lincomb_cache: dict = {}
    prod_cache: dict = {}
    block_size_of = {}
    for vars_in_block in cp.blocks:
        for v in vars_in_block:
            block_size_of[v] = len(vars_in_block)

    def var_rank(v: int):
        if cp.kinds[v] == "t":
            return (0, 0, v)
        return (1, block_size_of.get(v, 10**6), v)

    # pure_sum[v]: (block index, frozenset of coord vars) when v is a plain
    # unit-coefficient sum of coordinates from one block; used for RLT.
    pure_sum: dict[int, tuple[int, frozenset]] = {}
    # rect_of[v]: v as a union of cross-block rectangles over marginal masses,
    # [(coef, per-block frozenset-or-None)]; drives the joint lifting.
    n_blocks = len(cp.blocks)
    rect_of: dict[int, tuple] = {}
    for bi, vars_in_block in enumerate(cp.blocks):
        for v in vars_in_block:
            pure_sum[v] = (bi, frozenset((v,)))
            rect = [None] * n_blocks
            rect[bi] = frozenset((v,))
            rect_of[v] = ((Fraction(1), tuple(rect)),)

    MAX_RECTS = 4096

    def lincomb_var(terms, const) -> int:
        terms = tuple(sorted(terms))
        if len(terms) == 1 and terms[0][1] == 1 and const == 0:
            return terms[0][0]
        key = (terms, const)
        if key in lincomb_cache:
            return lincomb_cache[key]
        vlo = float(const) + sum(
            min(float(c) * lo[j], float(c) * hi[j]) for j, c in terms
        )
        vhi = float(const) + sum(
            max(float(c) * lo[j], float(c) * hi[j]) for j, c in terms
        )
        v = new_var("lin", f"l{len(lincomb_cache)}", vlo, vhi)
        cp.lindefs.append((v, terms, const))
        lincomb_cache[key] = v
        if const == 0 and all(c == 1 for _, c in terms):
            blocks_touched = {pure_sum[j][0] for j, _ in terms if j in pure_sum}
            if len(blocks_touched) == 1 and all(j in pure_sum for j, _ in terms):
                members = frozenset().union(*(pure_sum[j][1] for j, _ in terms))
                if sum(len(pure_sum[j][1]) for j, _ in terms) == len(members):
                    pure_sum[v] = (next(iter(blocks_touched)), members)
        if all(j in rect_of for j, _ in terms):
            rects = []
            for j, c in terms:
                rects.extend((c * rc, rt) for rc, rt in rect_of[j])
            if const:
                rects.append((Fraction(const), tuple([None] * n_blocks)))
            if len(rects) <= MAX_RECTS:
                rect_of[v] = tuple(rects)
        return v

    def prod_var(a: int, b: int) -> int:
        key = (min(a, b), max(a, b))
        if key in prod_cache:
            return prod_cache[key]
        cands = [
            lo[a] * lo[b], lo[a] * hi[b], hi[a] * lo[b], hi[a] * hi[b]
        ]
        w = new_var("prod", f"w({cp.names[a]}*{cp.names[b]})", min(cands), max(cands))
        cp.prods.append((w, key[0], key[1]))
        prod_cache[key] = w
        ra, rb = rect_of.get(a), rect_of.get(b)
        if ra is not None and rb is not None:
            crossed = []
            ok = True
            for ca, ta in ra:
                for cb, tb in rb:
                    merged = []
                    for sa, sb in zip(ta, tb):
                        if sa is not None and sb is not None:
                            ok = False
                            break
                        merged.append(sa if sa is not None else sb)
                    if not ok:
                        break
                    crossed.append((ca * cb, tuple(merged)))
                if not ok:
                    break
            if ok and len(crossed) <= MAX_RECTS:
                rect_of[w] = tuple(crossed)
        return w

    def linearize(poly: PolynomialExpr):
        """Rewrite a block-multilinear polynomial over lincomb/product vars.

        Monomials sharing a pivot block are grouped by their cofactor
        polynomial; pivots with identical cofactors merge into one mass sum,
        which keeps products between interface-sized aggregates rather than
        raw coordinates.
        """
        const = Fraction(0)
        terms: dict[int, Fraction] = {}
        multi: dict[tuple, Fraction] = {}
        for mono, c in sorted(poly.terms.items()):
            if not mono:
                const += c
            elif len(mono) == 1:
                terms[mono[0]] = terms.get(mono[0], Fraction(0)) + c
            else:
                multi[mono] = c
        by_pivot: dict[int, dict] = {}
        for mono, c in multi.items():
            pivot = min(mono, key=var_rank)
            rest = list(mono)
            rest.remove(pivot)
            by_pivot.setdefault(pivot, {})[tuple(rest)] = c
        by_cofactor: dict[tuple, list[int]] = {}
        for pivot, cof in by_pivot.items():
            key = tuple(sorted(cof.items()))
            by_cofactor.setdefault(key, []).append(pivot)
        for key in sorted(by_cofactor, key=repr):
            pivots = sorted(by_cofactor[key])
            sub_terms, sub_const = linearize(PolynomialExpr(dict(key)))
            cof = lincomb_var(tuple(sub_terms.items()), sub_const)
            left = (
                pivots[0]
                if len(pivots) == 1
                else lincomb_var(tuple((p, Fraction(1)) for p in pivots), Fraction(0))
            )
            w = prod_var(left, cof)
            terms[w] = terms.get(w, Fraction(0)) + 1
        return terms, const

    eps = Fraction(program.eps_feas)
    for g in cp.eq_polys:
        terms, const = linearize(g)
        cp.rows.append(Row(tuple(terms.items()), const, -eps, eps, "data-eq"))
    for h in cp.ineq_polys:
        terms, const = linearize(h)
        cp.rows.append(Row(tuple(terms.items()), const, None, Fraction(0), "ineq"))
    for t, num, den in fraction_terms:
        n_terms, n_const = linearize(num)
        d_terms, d_const = linearize(den)
        cp.fraction_forms.append(
            (t, (tuple(sorted(n_terms.items())), n_const),
             (tuple(sorted(d_terms.items())), d_const))
        )
    for vars_in_block in cp.blocks:
        cp.rows.append(
            Row(tuple((v, Fraction(1)) for v in vars_in_block), Fraction(0),
                Fraction(1), Fraction(1), "simplex")
        )

    # --- RLT: products of disjoint mass sums against a common partner ------
    # If x_1..x_k are disjoint coordinate sums of one block and each product
    # w_i = x_i * y exists, then sum_i w_i = y when the sums cover the block
    # (simplex identity) and sum_i w_i <= y otherwise (y >= 0).
    partners: dict[int, list] = {}
    for w, a, b_ in cp.prods:
        for x, y in ((a, b_), (b_, a)):
            if x in pure_sum:
                partners.setdefault(y, []).append((x, w))
    for y in sorted(partners):
        by_block: dict[int, list] = {}
        for x, w in partners[y]:
            by_block.setdefault(pure_sum[x][0], []).append((x, w))
        for bi, pairs in sorted(by_block.items()):
            pairs.sort()
            covered: set = set()
            chosen = []
            for x, w in pairs:  # greedy disjoint packing, deterministic
                members = pure_sum[x][1]
                if not (members & covered):
                    covered |= members
                    chosen.append((x, w))
            if len(chosen) < 1:
                continue
            terms = tuple((w, Fraction(1)) for _, w in chosen) + ((y, Fraction(-1)),)
            if covered == set(cp.blocks[bi]):
                cp.rows.append(Row(terms, Fraction(0), Fraction(0), Fraction(0), "rlt"))
            elif lo[y] >= 0 and len(chosen) > 1:
                cp.rows.append(Row(terms, Fraction(0), None, Fraction(0), "rlt"))

    # --- objective ----------------------------------------------------------
    for part in cp.frac_parts:
        obj_terms: dict[int, Fraction] = {}
        obj_const = Fraction(0)
        for t, coef, num, den in part:
            if t is None:
                lin, c0 = linearize(num)
                for j, c in lin.items():
                    obj_terms[j] = obj_terms.get(j, Fraction(0)) + coef * c
                obj_const += coef * c0
            else:
                obj_terms[t] = obj_terms.get(t, Fraction(0)) + coef
        cp.objective_parts.append((tuple(sorted(obj_terms.items())), obj_const))

    # --- joint-distribution lifting -----------------------------------------
    # A product measure over the blocks induces a joint J with these exactly
    # linear properties: per-coordinate marginals, and every product-var
    # rectangle identity w = sum of J over its rectangles. Adding J with
    # those rows is a valid lift that hands the LP the entire
    # shared-confounder relaxation at the root.
    sizes = [len(b) for b in cp.blocks]
    total_j = 1
    for s in sizes:
        total_j *= s
    if n_blocks >= 2 and total_j <= 20000 and cp.prods:
        j_of: dict[tuple, int] = {}
        for combo in itertools.product(*cp.blocks):
            j_of[combo] = new_var("joint", f"J{len(j_of)}", 0.0, 1.0)
        cp.n_joint_vars = len(j_of)

        for bi, vars_in_block in enumerate(cp.blocks):
            for v in vars_in_block:
                terms = tuple(
                    (jv, Fraction(1)) for combo, jv in j_of.items() if combo[bi] == v
                ) + ((v, Fraction(-1)),)
                cp.rows.append(Row(terms, Fraction(0), Fraction(0), Fraction(0), "j-marg"))

        def rect_terms(rects):
            accum: dict[int, Fraction] = {}
            const = Fraction(0)
            for coef, rect in rects:
                expanded = [
                    sorted(rect[bi]) if rect[bi] is not None else cp.blocks[bi]
                    for bi in range(n_blocks)
                ]
                count = 1
                for e in expanded:
                    count *= len(e)
                if count == total_j:
                    const += coef  # full-space rectangle sums to 1
                    continue
                for combo in itertools.product(*expanded):
                    jv = j_of[tuple(combo)]
                    accum[jv] = accum.get(jv, Fraction(0)) + coef
            return accum, const

        for w, a, b_ in cp.prods:
            rects = rect_of.get(w)
            if rects is None:
                continue
            accum, const = rect_terms(rects)
            terms = tuple(sorted(accum.items())) + ((w, Fraction(-1)),)
            cp.rows.append(Row(terms, const, Fraction(0), Fraction(0), "j-prod"))

    cp.n_vars = len(cp.kinds)
    cp.root_lo = np.array(lo, dtype=float)
    cp.root_hi = np.array(hi, dtype=float)
    return cp


# ---------------------------------------------------------------------------
# FBBT
# ---------------------------------------------------------------------------


def _prop_rows(cp: CompiledProgram, extra_rows=()):
    rows = []
    for row in list(cp.rows) + list(extra_rows):
        rows.append((row.terms, float(row.const),
                     -np.inf if row.lo is None else float(row.lo),
                     np.inf if row.hi is None else float(row.hi)))
    for v, terms, const in cp.lindefs:
        all_terms = ((v, Fraction(-1)),) + tuple(terms)
        rows.append((all_terms, float(const), 0.0, 0.0))
    return rows


def fbbt(cp: CompiledProgram, lo, hi, rounds: int, extra_rows=()):
    """Tighten boxes in place; returns False when a box empties."""
    rows = _prop_rows(cp, extra_rows)
    for _ in range(max(1, rounds)):
        changed = False
        for terms, const, rlo, rhi in rows:
            act_lo = const
            act_hi = const
            for j, c in terms:
                c = float(c)
                if c > 0:
                    act_lo += c * lo[j]
                    act_hi += c * hi[j]
                else:
                    act_lo += c * hi[j]
                    act_hi += c * lo[j]
            if act_lo > rhi + 1e-7 or act_hi < rlo - 1e-7:
                return False
            for j, c in terms:
                c = float(c)
                term_lo = min(c * lo[j], c * hi[j])
                term_hi = max(c * lo[j], c * hi[j])
                rest_lo = act_lo - term_lo
                rest_hi = act_hi - term_hi
                # rlo - rest_hi <= c*x_j <= rhi - rest_lo
                tlo = rlo - rest_hi
                thi = rhi - rest_lo
                if c > 0:
                    nlo, nhi = tlo / c, thi / c
                else:
                    nlo, nhi = thi / c, tlo / c
                nlo -= OUT_EPS + 1e-12 * abs(nlo)
                nhi += OUT_EPS + 1e-12 * abs(nhi)
                if nlo > lo[j] + 1e-10:
                    lo[j] = nlo
                    changed = True
                if nhi < hi[j] - 1e-10:
                    hi[j] = nhi
                    changed = True
                if lo[j] > hi[j] + 1e-9:
                    return False
        for w, a, b in cp.prods:
            cands = (lo[a] * lo[b], lo[a] * hi[b], hi[a] * lo[b], hi[a] * hi[b])
            nlo, nhi = min(cands) - OUT_EPS, max(cands) + OUT_EPS
            if nlo > lo[w] + 1e-10:
                lo[w] = nlo
                changed = True
            if nhi < hi[w] - 1e-10:
                hi[w] = nhi
                changed = True
            if lo[w] > hi[w] + 1e-9:
                return False
            for x, y in ((a, b), (b, a)):
                if lo[y] > 1e-12 or hi[y] < -1e-12:
                    cands = [lo[w] / lo[y] if lo[y] else np.inf,
                             lo[w] / hi[y] if hi[y] else np.inf,
                             hi[w] / lo[y] if lo[y] else np.inf,
                             hi[w] / hi[y] if hi[y] else np.inf]
                    finite = [c for c in cands if np.isfinite(c)]
                    if len(finite) == 4:
                        nlo, nhi = min(finite) - OUT_EPS, max(finite) + OUT_EPS
                        if nlo > lo[x] + 1e-10:
                            lo[x] = nlo
                            changed = True
                        if nhi < hi[x] - 1e-10:
                            hi[x] = nhi
                            changed = True
                        if lo[x] > hi[x] + 1e-9:
                            return False
        for t, n_form, d_form in cp.fraction_forms:
            n_lo, n_hi = _form_interval(n_form, lo, hi)
            d_lo, d_hi = _form_interval(d_form, lo, hi)
            n_lo, d_lo = max(n_lo, 0.0), max(d_lo, 0.0)
            if d_hi > 1e-12:
                new_lo = max(0.0, n_lo) / d_hi - OUT_EPS
                if new_lo > lo[t] + 1e-10:
                    lo[t] = new_lo
                    changed = True
            if d_lo > 1e-12:
                new_hi = n_hi / d_lo + OUT_EPS
                if new_hi < hi[t] - 1e-10:
                    hi[t] = new_hi
                    changed = True
            if lo[t] > hi[t] + 1e-9:
                return False
        if not changed:
            break
    return True


def _form_interval(form, lo, hi):
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


# ---------------------------------------------------------------------------
# Node LP
# ---------------------------------------------------------------------------

FIX_TOL = 1e-11


def build_lp(cp: CompiledProgram, lo, hi, objective, extra_rows=()):
    """LP relaxation over the given boxes; fixed variables are folded out.

    ``objective`` is (terms, const); returns (LinearProgram, col_of, folded
    objective interval constant (Fraction lo)). Interval folding keeps the
    relaxation valid even when a "fixed" variable retains residual width.
    """
    n = cp.n_vars
    fixed = (hi - lo) <= FIX_TOL
    col_of = -np.ones(n, dtype=int)
    free = np.flatnonzero(~fixed)
    for col, j in enumerate(free):
        col_of[j] = col
    nf = len(free)

    lof = [Fraction(float(lo[j])) for j in free]
    hif = [Fraction(float(hi[j])) for j in free]

    a_rows, b, senses, rows_frac = [], [], [], []

    def emit(terms, const, rlo, rhi):
        dense = np.zeros(nf)
        coefs = {}
        c_lo = Fraction(const)
        c_hi = Fraction(const)
        for j, c in terms:
            c = Fraction(c)
            if fixed[j]:
                vlo, vhi = Fraction(float(lo[j])), Fraction(float(hi[j]))
                c_lo += min(c * vlo, c * vhi)
                c_hi += max(c * vlo, c * vhi)
            else:
                col = col_of[j]
                dense[col] += float(c)
                coefs[col] = coefs.get(col, Fraction(0)) + c
        if rhi is not None:
            a_rows.append(dense)
            b.append(float(rhi - c_lo))
            senses.append("le")
            rows_frac.append((coefs, rhi - c_lo, "le"))
        if rlo is not None:
            a_rows.append(-dense)
            b.append(float(c_hi - rlo))
            senses.append("le")
            rows_frac.append(({k: -v for k, v in coefs.items()}, c_hi - rlo, "le"))

    for row in list(cp.rows) + list(extra_rows):
        emit(row.terms, row.const, row.lo, row.hi)
    for v, terms, const in cp.lindefs:
        emit(((v, Fraction(-1)),) + tuple(terms), const, Fraction(0), Fraction(0))

    for w, a, b_ in cp.prods:
        if fixed[a] and fixed[b_]:
            continue  # w's box already collapsed by FBBT
        al, ah = Fraction(float(lo[a])), Fraction(float(hi[a]))
        bl, bh = Fraction(float(lo[b_])), Fraction(float(hi[b_]))
        # McCormick over current boxes; fixed factors fold away inside emit()
        emit(((w, Fraction(-1)), (a, bl), (b_, al)), -al * bl, None, Fraction(0))
        emit(((w, Fraction(-1)), (a, bh), (b_, ah)), -ah * bh, None, Fraction(0))
        emit(((w, Fraction(1)), (a, -bh), (b_, -al)), al * bh, None, Fraction(0))
        emit(((w, Fraction(1)), (a, -bl), (b_, -ah)), ah * bl, None, Fraction(0))

    # secant rows for each fraction t = N/D over the node's t box
    for t, (n_terms, n_const), (d_terms, d_const) in cp.fraction_forms:
        t_lo = Fraction(float(lo[t]))
        t_hi = Fraction(float(hi[t]))
        low_terms = dict(n_terms)
        for j, c in d_terms:
            low_terms[j] = low_terms.get(j, Fraction(0)) - t_lo * c
        emit(tuple(low_terms.items()), n_const - t_lo * d_const, Fraction(0), None)
        high_terms = dict(n_terms)
        for j, c in d_terms:
            high_terms[j] = high_terms.get(j, Fraction(0)) - t_hi * c
        emit(tuple(high_terms.items()), n_const - t_hi * d_const, None, Fraction(0))

    obj_terms, obj_const = objective
    c = np.zeros(nf)
    c_frac = [Fraction(0)] * nf
    folded = Fraction(obj_const)
    for j, coef in obj_terms:
        coef = Fraction(coef)
        if fixed[j]:
            vlo, vhi = Fraction(float(lo[j])), Fraction(float(hi[j]))
            folded += min(coef * vlo, coef * vhi)
        else:
            col = col_of[j]
            c[col] += float(coef)
            c_frac[col] += coef

    # upper-bound rows only where not already implied by structure rows
    skip_upper = np.zeros(nf, dtype=bool)
    for j in free:
        kind = cp.kinds[j]
        col = col_of[j]
        if kind in ("prod", "lin"):
            skip_upper[col] = True  # implied by McCormick / defining rows
        elif kind == "joint" and hi[j] >= 1.0 - 1e-12:
            skip_upper[col] = True  # marginal rows cap joint entries
        elif kind == "coord" and hi[j] >= 1.0 - 1e-12:
            skip_upper[col] = True  # simplex row caps coords at 1

    lp = LinearProgram(
        n=nf,
        c=c,
        a_rows=a_rows,
        b=np.array(b, dtype=float),
        senses=senses,
        lo=np.array([float(x) for x in lof]),
        hi=np.array([float(x) for x in hif]),
        c_frac=c_frac,
        rows_frac=rows_frac,
        lo_frac=lof,
        hi_frac=hif,
        skip_upper=skip_upper,
    )
    return lp, col_of, folded


# ---------------------------------------------------------------------------
# A data-consistent starting point for the shipped bias structures
# ---------------------------------------------------------------------------


def natural_start(program) -> np.ndarray | None:
    """Raw scheme point matching the observed table with inert bias nodes.

    Selection nodes select everyone, the policy has no effect, and the proxy
    copies the outcome, so every shipped budget constraint holds at any
    delta. Returns None when the graph does not have the expected shape.
    """
    scheme = program.scheme
    roles = program.metric.roles
    freq = dict(program.observed)
    if not freq:
        return None
    attr, outcome, pred = roles.attribute, roles.outcome, roles.prediction

    def inert_fidx(node):
        """Response index for bias nodes that leave the data untouched."""
        parents = scheme.obs_parents[node]
        m = 2 ** len(parents)
        if node == roles.selection:
            return (1 << m) - 1  # select everyone
        if node == roles.policy:
            return 0  # policy off
        if node == roles.proxy:
            if outcome not in parents:
                return None
            pos = parents.index(outcome)
            bits = 0
            for combo in itertools.product((0, 1), repeat=len(parents)):
                bits = (bits << 1) | combo[pos]
            return bits  # copy the outcome
        return None

    inert = {}
    for node in scheme.dag.observed:
        if node in (attr, outcome, pred):
            continue
        f = inert_fidx(node)
        if f is None:
            return None
        inert[node] = f

    a_bi = scheme.node_block.get(attr)
    if a_bi is None or scheme.blocks[a_bi].nodes != (attr,):
        return None
    main_bi = scheme.node_block[pred]
    if scheme.node_block.get(outcome) != main_bi:
        return None  # cannot carry the (y, p) dependence across blocks

    point = np.zeros(scheme.total_dim)
    pa1 = float(sum(f for (a, _, _), f in freq.items() if a == 1))
    point[scheme.blocks[a_bi].offset + 0] = 1.0 - pa1
    point[scheme.blocks[a_bi].offset + 1] = pa1

    def profile_fidx(node, v0, v1):
        """Index of the response mapping attribute a to v_a, other inputs moot."""
        parents = scheme.obs_parents[node]
        if attr not in parents:
            return None
        pos = parents.index(attr)
        bits = 0
        for combo in itertools.product((0, 1), repeat=len(parents)):
            bits = (bits << 1) | (v1 if combo[pos] else v0)
        return bits

    pa = {0: 1.0 - pa1, 1: pa1}
    cond = {
        cell: (float(f) / pa[cell[0]] if pa[cell[0]] > 0 else 0.0)
        for cell, f in freq.items()
    }
    main = scheme.blocks[main_bi]
    for (y0, p0, y1, p1) in itertools.product((0, 1), repeat=4):
        weight = cond[(0, y0, p0)] * cond[(1, y1, p1)]
        if weight <= 0:
            continue
        fidx = {n: inert[n] for n in main.nodes if n in inert}
        fy = profile_fidx(outcome, y0, y1)
        fp = profile_fidx(pred, p0, p1)
        if fy is None or fp is None:
            return None
        fidx[outcome] = fy
        fidx[pred] = fp
        point[scheme.coord_index(main_bi, fidx)] += weight

    for bi, block in enumerate(scheme.blocks):
        if bi in (a_bi, main_bi):
            continue
        fidx = {n: inert[n] for n in block.nodes}
        point[scheme.coord_index(bi, fidx)] = 1.0
    return point
