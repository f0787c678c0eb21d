"""Factual/counterfactual event expressions compiled to polynomials.

The probability of any conjunction of (possibly interventional) atoms is a
polynomial over scheme coordinates with exact rational coefficients; a
conditional probability is a ratio of two such polynomials. Compilation
enumerates satisfying response assignments block by block and only takes
cross products over blocks genuinely linked by an atom's evaluation path.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .scheme import ResponseScheme

__all__ = [
    "EventError",
    "ConditioningOnNullEvent",
    "PolynomialExpr",
    "RationalExpr",
    "Atom",
    "Event",
    "parse_event",
    "parse_constraint",
    "ParsedConstraint",
    "compile_event_poly",
    "compile_probability",
    "evaluate",
]

EPS_DEN = 1e-9


class EventError(ValueError):
    """Raised for malformed event text or out-of-domain values."""


class ConditioningOnNullEvent(ArithmeticError):
    """Raised when evaluating a conditional whose condition has ~zero mass."""


# ---------------------------------------------------------------------------
# Polynomial IR
# ---------------------------------------------------------------------------

Monomial = tuple  # sorted tuple of coordinate indices, repeats allowed


class PolynomialExpr:
    """Multivariate polynomial over scheme coordinates, exact coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[Monomial, Fraction] = {}
        if terms:
            for mono, coef in terms.items():
                coef = Fraction(coef)
                if coef:
                    self.terms[tuple(sorted(mono))] = (
                        self.terms.get(tuple(sorted(mono)), Fraction(0)) + coef
                    )
            self.terms = {m: c for m, c in self.terms.items() if c}

    @classmethod
    def const(cls, value) -> "PolynomialExpr":
        p = cls()
        value = Fraction(value)
        if value:
            p.terms[()] = value
        return p

    @classmethod
    def coord(cls, index: int, coef=1) -> "PolynomialExpr":
        p = cls()
        coef = Fraction(coef)
        if coef:
            p.terms[(index,)] = coef
        return p

    def copy(self) -> "PolynomialExpr":
        p = PolynomialExpr()
        p.terms = dict(self.terms)
        return p

    def __add__(self, other) -> "PolynomialExpr":
        if not isinstance(other, PolynomialExpr):
            other = PolynomialExpr.const(other)
        p = self.copy()
        for mono, coef in other.terms.items():
            newc = p.terms.get(mono, Fraction(0)) + coef
            if newc:
                p.terms[mono] = newc
            else:
                p.terms.pop(mono, None)
        return p

    def __neg__(self) -> "PolynomialExpr":
        p = PolynomialExpr()
        p.terms = {m: -c for m, c in self.terms.items()}
        return p

    def __sub__(self, other) -> "PolynomialExpr":
        if not isinstance(other, PolynomialExpr):
            other = PolynomialExpr.const(other)
        return self + (-other)

    def __mul__(self, other) -> "PolynomialExpr":
        if not isinstance(other, PolynomialExpr):
            other = PolynomialExpr.const(other)
        p = PolynomialExpr()
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(sorted(m1 + m2))
                newc = p.terms.get(mono, Fraction(0)) + c1 * c2
                if newc:
                    p.terms[mono] = newc
                else:
                    p.terms.pop(mono, None)
        return p

    def scale(self, factor) -> "PolynomialExpr":
        factor = Fraction(factor)
        p = PolynomialExpr()
        if factor:
            p.terms = {m: c * factor for m, c in self.terms.items()}
        return p

    def __eq__(self, other):
        return isinstance(other, PolynomialExpr) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items())))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def constant(self) -> Fraction:
        return self.terms.get((), Fraction(0))

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def variables(self) -> set[int]:
        return {i for m in self.terms for i in m}

    def evaluate(self, point) -> float:
        total = 0.0
        for mono, coef in self.terms.items():
            value = float(coef)
            for i in mono:
                value *= point[i]
            total += value
        return total

    def evaluate_exact(self, point) -> Fraction:
        total = Fraction(0)
        for mono, coef in self.terms.items():
            value = coef
            for i in mono:
                value *= Fraction(point[i])
            total += value
        return total

    def substitute(self, index: int, replacement: "PolynomialExpr") -> "PolynomialExpr":
        out = PolynomialExpr()
        for mono, coef in self.terms.items():
            k = mono.count(index)
            rest = tuple(i for i in mono if i != index)
            term = PolynomialExpr({rest: coef})
            for _ in range(k):
                term = term * replacement
            out = out + term
        return out

    def reduced(self, scheme: ResponseScheme) -> "PolynomialExpr":
        """Canonical form modulo the per-block simplex identities.

        Eliminates each block's last coordinate via 1 - (sum of the rest),
        so two polynomials agree on the product of simplices iff their
        reduced forms are identical.
        """
        poly = self
        for block in scheme.blocks:
            last = block.offset + block.dim - 1
            if not any(last in m for m in poly.terms):
                continue
            repl = PolynomialExpr.const(1)
            for i in range(block.offset, last):
                repl = repl - PolynomialExpr.coord(i)
            poly = poly.substitute(last, repl)
        return poly

    def canonical_items(self):
        return sorted(self.terms.items())

    def serialize(self) -> str:
        parts = [f"{c}*{'.'.join(map(str, m)) or '1'}" for m, c in self.canonical_items()]
        return " + ".join(parts) if parts else "0"

    def __repr__(self):
        return f"PolynomialExpr({self.serialize()})"


@dataclass(frozen=True)
class RationalExpr:
    """Ratio of two polynomials; denominator constant 1 for plain events."""

    num: PolynomialExpr
    den: PolynomialExpr = field(default_factory=lambda: PolynomialExpr.const(1))

    def __post_init__(self):
        if self.den.is_zero:
            raise EventError("denominator identically zero")

    @property
    def is_fraction(self) -> bool:
        return self.den != PolynomialExpr.const(1)

    def serialize(self) -> str:
        return f"({self.num.serialize()}) / ({self.den.serialize()})"


def evaluate(expr, point, eps_den: float = EPS_DEN, exact: bool = False):
    """Evaluate a RationalExpr (or PolynomialExpr) at a scheme point."""
    if isinstance(expr, PolynomialExpr):
        return expr.evaluate_exact(point) if exact else expr.evaluate(point)
    den = expr.den.evaluate_exact(point) if exact else expr.den.evaluate(point)
    if abs(den) < eps_den:
        raise ConditioningOnNullEvent(
            f"conditioning on near-null event (denominator {float(den):.3g})"
        )
    num = expr.num.evaluate_exact(point) if exact else expr.num.evaluate(point)
    return num / den


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """One comparison ``node(do...) = value`` in an event conjunction."""

    node: str
    value: int
    do: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "do", tuple(sorted(self.do)))
        for n, v in self.do:
            if n == self.node and v != self.value:
                raise EventError(
                    f"atom evaluates {self.node}={self.value} but intervenes {n}={v}"
                )

    def label(self) -> str:
        if self.do:
            inner = ",".join(f"{n}={v}" for n, v in self.do)
            return f"{self.node}({inner})={self.value}"
        return f"{self.node}={self.value}"


@dataclass(frozen=True)
class Event:
    atoms: tuple[Atom, ...]
    condition: tuple[Atom, ...] = ()

    def label(self) -> str:
        joint = " & ".join(a.label() for a in self.atoms)
        if self.condition:
            return f"P({joint} | {' & '.join(a.label() for a in self.condition)})"
        return f"P({joint})"


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<name>[A-Za-z][A-Za-z0-9_]*)|(?P<num>\d+\.\d+|\.\d+|\d+)"
    r"|(?P<op><=|>=|==|[()=&|+\-*,]))"
)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if not m or m.end() == pos:
                if text[pos:].strip():
                    raise EventError(f"syntax error at position {pos}: {text[pos:pos+10]!r}")
                break
            if m.group("name"):
                self.tokens.append(("name", m.group("name"), m.start("name")))
            elif m.group("num"):
                self.tokens.append(("num", m.group("num"), m.start("num")))
            else:
                self.tokens.append(("op", m.group("op"), m.start("op")))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind, value=None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            raise EventError(
                f"syntax error at position {tok[2]}: expected {value or kind}, got {tok[1]!r}"
            )
        return tok


def _check_value(dag, node, value, pos):
    if dag is not None:
        if node not in dag.nodes:
            raise EventError(f"unknown node {node!r} at position {pos}")
        if not (0 <= value < dag.card(node)):
            raise EventError(f"value {value} out of domain for {node!r}")
    elif value not in (0, 1):
        raise EventError(f"value {value} out of domain for {node!r}")


def _parse_atom(toks: _Tokens, dag) -> Atom:
    kind, node, pos = toks.next()
    if kind != "name":
        raise EventError(f"syntax error at position {pos}: expected node name, got {node!r}")
    do = []
    if toks.peek()[:2] == ("op", "("):
        toks.next()
        while True:
            _, dn, dpos = toks.expect("name")
            toks.expect("op", "=")
            _, dv, _ = toks.expect("num")
            dv = int(dv)
            _check_value(dag, dn, dv, dpos)
            do.append((dn, dv))
            if toks.peek()[:2] == ("op", ","):
                toks.next()
                continue
            toks.expect("op", ")")
            break
    toks.expect("op", "=")
    _, val, vpos = toks.expect("num")
    val = int(val)
    _check_value(dag, node, val, pos)
    return Atom(node, val, tuple(do))


def _parse_conj(toks: _Tokens, dag) -> tuple[Atom, ...]:
    atoms = [_parse_atom(toks, dag)]
    while toks.peek()[:2] == ("op", "&"):
        toks.next()
        atoms.append(_parse_atom(toks, dag))
    return tuple(atoms)


def parse_event(text: str, dag=None) -> Event:
    """Parse ``P(atom & ... [| atom & ...])`` into an Event.

    When a Dag is supplied, node names and values are validated against it.
    """
    toks = _Tokens(text)
    tok = toks.expect("name")
    if tok[1] != "P":
        raise EventError(f"syntax error at position {tok[2]}: events start with 'P('")
    toks.expect("op", "(")
    atoms = _parse_conj(toks, dag)
    condition: tuple[Atom, ...] = ()
    if toks.peek()[:2] == ("op", "|"):
        toks.next()
        condition = _parse_conj(toks, dag)
    toks.expect("op", ")")
    if toks.peek()[0] != "eof":
        tok = toks.peek()
        raise EventError(f"syntax error at position {tok[2]}: trailing {tok[1]!r}")
    return Event(atoms, condition)


# ---------------------------------------------------------------------------
# Constraint expressions (arithmetic over probabilities and the budget D)
# ---------------------------------------------------------------------------


class _DPoly:
    """Polynomial over probability terms with coefficients affine in D."""

    def __init__(self, p0=None, p1=None):
        self.p0 = p0 if p0 is not None else PolynomialExpr()
        self.p1 = p1 if p1 is not None else PolynomialExpr()

    def __add__(self, other):
        return _DPoly(self.p0 + other.p0, self.p1 + other.p1)

    def __sub__(self, other):
        return _DPoly(self.p0 - other.p0, self.p1 - other.p1)

    def __neg__(self):
        return _DPoly(-self.p0, -self.p1)

    def __mul__(self, other):
        if not self.p1.is_zero and not other.p1.is_zero:
            raise EventError("constraint is quadratic in the budget symbol D")
        return _DPoly(
            self.p0 * other.p0, self.p0 * other.p1 + self.p1 * other.p0
        )

    def substitute(self, delta) -> PolynomialExpr:
        return self.p0 + self.p1.scale(Fraction(delta))


class CExpr:
    """Constraint expression AST node."""

    __slots__ = ()


@dataclass(frozen=True)
class CNum(CExpr):
    value: Fraction

    def to_text(self):
        return str(self.value) if self.value.denominator == 1 else f"{float(self.value)}"


@dataclass(frozen=True)
class CBudget(CExpr):
    def to_text(self):
        return "D"


@dataclass(frozen=True)
class CProb(CExpr):
    atoms: tuple[Atom, ...]

    def to_text(self):
        return f"P({' & '.join(a.label() for a in self.atoms)})"


@dataclass(frozen=True)
class CNeg(CExpr):
    inner: CExpr

    def to_text(self):
        return f"-({self.inner.to_text()})"


@dataclass(frozen=True)
class CBin(CExpr):
    op: str
    left: CExpr
    right: CExpr

    def to_text(self):
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"


def _rename_cexpr(expr: CExpr, mapping) -> CExpr:
    if isinstance(expr, (CNum, CBudget)):
        return expr
    if isinstance(expr, CProb):
        atoms = tuple(
            Atom(
                mapping.get(a.node, a.node),
                a.value,
                tuple((mapping.get(n, n), v) for n, v in a.do),
            )
            for a in expr.atoms
        )
        return CProb(atoms)
    if isinstance(expr, CNeg):
        return CNeg(_rename_cexpr(expr.inner, mapping))
    return CBin(expr.op, _rename_cexpr(expr.left, mapping), _rename_cexpr(expr.right, mapping))


def _cexpr_dpoly(expr: CExpr, scheme: ResponseScheme) -> _DPoly:
    if isinstance(expr, CNum):
        return _DPoly(PolynomialExpr.const(expr.value))
    if isinstance(expr, CBudget):
        return _DPoly(PolynomialExpr(), PolynomialExpr.const(1))
    if isinstance(expr, CProb):
        return _DPoly(compile_event_poly(scheme, expr.atoms))
    if isinstance(expr, CNeg):
        return -_cexpr_dpoly(expr.inner, scheme)
    left, right = _cexpr_dpoly(expr.left, scheme), _cexpr_dpoly(expr.right, scheme)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    return left * right


def _cexpr_check_budget_degree(expr: CExpr) -> int:
    if isinstance(expr, CNum):
        return 0
    if isinstance(expr, CBudget):
        return 1
    if isinstance(expr, CProb):
        return 0
    if isinstance(expr, CNeg):
        return _cexpr_check_budget_degree(expr.inner)
    dl = _cexpr_check_budget_degree(expr.left)
    dr = _cexpr_check_budget_degree(expr.right)
    if expr.op == "*":
        if dl + dr > 1:
            raise EventError("constraint is quadratic in the budget symbol D")
        return dl + dr
    return max(dl, dr)


@dataclass(frozen=True)
class ParsedConstraint:
    """A budget constraint normalized to ``expr (<=|=) 0`` with D affine."""

    text: str
    sense: str  # "le" or "eq"
    expr: CExpr  # already normalized to compare against zero

    def rename(self, mapping) -> "ParsedConstraint":
        renamed = _rename_cexpr(self.expr, mapping)
        return ParsedConstraint(renamed.to_text() + (" = 0" if self.sense == "eq" else " <= 0"),
                                self.sense, renamed)

    def compile(self, scheme: ResponseScheme, delta) -> tuple[PolynomialExpr, str]:
        return _cexpr_dpoly(self.expr, scheme).substitute(delta), self.sense

    def budget_degree(self) -> int:
        return _cexpr_check_budget_degree(self.expr)


def _parse_factor(toks: _Tokens, dag) -> CExpr:
    kind, val, pos = toks.peek()
    if kind == "op" and val == "-":
        toks.next()
        return CNeg(_parse_factor(toks, dag))
    if kind == "op" and val == "(":
        toks.next()
        inner = _parse_expr(toks, dag)
        toks.expect("op", ")")
        return inner
    if kind == "num":
        toks.next()
        return CNum(Fraction(val))
    if kind == "name" and val == "D":
        toks.next()
        return CBudget()
    if kind == "name" and val == "P":
        toks.next()
        toks.expect("op", "(")
        atoms = _parse_conj(toks, dag)
        if toks.peek()[:2] == ("op", "|"):
            raise EventError(
                f"conditional probabilities are not allowed in constraints (position {pos})"
            )
        toks.expect("op", ")")
        return CProb(atoms)
    raise EventError(f"syntax error at position {pos}: unexpected {val!r}")


def _parse_term(toks: _Tokens, dag) -> CExpr:
    out = _parse_factor(toks, dag)
    while toks.peek()[:2] == ("op", "*"):
        toks.next()
        out = CBin("*", out, _parse_factor(toks, dag))
    return out


def _parse_expr(toks: _Tokens, dag) -> CExpr:
    out = _parse_term(toks, dag)
    while toks.peek()[:2] in (("op", "+"), ("op", "-")):
        _, op, _ = toks.next()
        out = CBin(op, out, _parse_term(toks, dag))
    return out


def parse_constraint(text: str, dag=None) -> ParsedConstraint:
    """Parse a budget constraint, normalizing to ``expr (<=|=) 0`` with D affine."""
    toks = _Tokens(text)
    lhs = _parse_expr(toks, dag)
    kind, op, pos = toks.next()
    if kind != "op" or op not in ("<=", ">=", "=", "=="):
        raise EventError(f"syntax error at position {pos}: expected comparison, got {op!r}")
    rhs = _parse_expr(toks, dag)
    if toks.peek()[0] != "eof":
        tok = toks.peek()
        raise EventError(f"syntax error at position {tok[2]}: trailing {tok[1]!r}")
    expr = CBin("-", lhs, rhs) if op != ">=" else CBin("-", rhs, lhs)
    sense = "eq" if op in ("=", "==") else "le"
    parsed = ParsedConstraint(text=text, sense=sense, expr=expr)
    parsed.budget_degree()
    return parsed


def compile_constraint(text: str, scheme: ResponseScheme, delta) -> tuple[PolynomialExpr, str]:
    """Compile a constraint string at budget value ``delta`` to ``poly (<=|=) 0``."""
    return parse_constraint(text, scheme.dag).compile(scheme, delta)


# ---------------------------------------------------------------------------
# Compilation of event probabilities
# ---------------------------------------------------------------------------


def _relevant_nodes(scheme: ResponseScheme, atom: Atom) -> set[str]:
    """Observed nodes whose response functions can change the atom's truth."""
    do = dict(atom.do)
    if atom.node in do:
        return set()
    seen: set[str] = set()
    stack = [atom.node]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        for p in scheme.obs_parents[node]:
            if p not in do:
                stack.append(p)
    return seen


def _atom_value(scheme, assignment, do, node, memo):
    if node in memo:
        return memo[node]
    if node in do:
        memo[node] = do[node]
        return do[node]
    pv = tuple(_atom_value(scheme, assignment, do, p, memo) for p in scheme.obs_parents[node])
    value = scheme.apply_function(node, assignment[node], pv)
    memo[node] = value
    return value


def compile_event_poly(scheme: ResponseScheme, atoms) -> PolynomialExpr:
    """Polynomial for the probability of an unconditional conjunction."""
    live: list[Atom] = []
    for atom in atoms:
        if atom.node in scheme.dag.hidden:
            raise EventError(f"event references hidden node {atom.node!r}")
        if atom.node not in scheme.dag.observed:
            raise EventError(f"unknown node {atom.node!r}")
        for n, _ in atom.do:
            if n not in scheme.dag.observed:
                raise EventError(f"cannot intervene on {n!r}")
        if atom.node in dict(atom.do):
            continue  # consistent forced atom is identically true
        live.append(atom)
    if not live:
        return PolynomialExpr.const(1)

    atom_blocks = [
        sorted({scheme.node_block[n] for n in _relevant_nodes(scheme, a)}) for a in live
    ]

    # Union-find over blocks so only genuinely linked blocks are enumerated jointly.
    parent: dict[int, int] = {}

    def find(b):
        parent.setdefault(b, b)
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        return b

    for blocks in atom_blocks:
        for first, second in zip(blocks, blocks[1:]):
            ra, rb = find(first), find(second)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    touched = {b for blocks in atom_blocks for b in blocks}
    groups: dict[int, list[int]] = {}
    for b in sorted(touched):
        groups.setdefault(find(b), []).append(b)

    result = PolynomialExpr.const(1)
    for root in sorted(groups):
        blocks = groups[root]
        group_atoms = [a for a, ab in zip(live, atom_blocks) if find(ab[0]) == root]
        by_do: dict[tuple, list[Atom]] = {}
        for a in group_atoms:
            by_do.setdefault(a.do, []).append(a)
        nodes_in_order = [scheme.blocks[b].nodes for b in blocks]
        poly = PolynomialExpr()
        for combo in itertools.product(*(scheme.block_assignments(b) for b in blocks)):
            assignment = {}
            for nodes, fidxs in zip(nodes_in_order, combo):
                assignment.update(zip(nodes, fidxs))
            ok = True
            for do, alist in by_do.items():
                memo: dict[str, int] = {}
                do_map = dict(do)
                for a in alist:
                    if _atom_value(scheme, assignment, do_map, a.node, memo) != a.value:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                mono = tuple(
                    sorted(
                        scheme.coord_index(b, {n: assignment[n] for n in scheme.blocks[b].nodes})
                        for b in blocks
                    )
                )
                poly.terms[mono] = poly.terms.get(mono, Fraction(0)) + 1
        result = result * poly
    return result


def compile_probability(scheme: ResponseScheme, event: Event) -> RationalExpr:
    """Compile an event's probability; conditionals become polynomial ratios."""
    if event.condition:
        num = compile_event_poly(scheme, tuple(event.atoms) + tuple(event.condition))
        den = compile_event_poly(scheme, event.condition)
        return RationalExpr(num, den)
    return RationalExpr(compile_event_poly(scheme, event.atoms))
