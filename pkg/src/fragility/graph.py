"""Causal DAGs: edgelist parsing, validation, and latent projection."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

__all__ = [
    "GraphError",
    "Dag",
    "NodeRoleMap",
    "parse_edgelist",
    "latent_project",
    "confounded_components",
]

NODE_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class GraphError(ValueError):
    """Raised for malformed edgelists, cycles, or invalid node annotations."""


def _check_node_name(name: str) -> str:
    if not NODE_NAME_RE.match(name):
        raise GraphError(f"invalid node name {name!r}")
    return name


@dataclass(frozen=True)
class Dag:
    """Immutable directed acyclic graph over named nodes.

    ``hidden`` marks unobserved nodes, ``conditioned`` marks nodes the data
    are conditioned on (e.g. a selection indicator). Cardinalities default
    to 2 for every node; entries in ``cardinality`` override that.
    """

    nodes: frozenset[str]
    edges: tuple[tuple[str, str], ...]
    hidden: frozenset[str] = frozenset()
    conditioned: frozenset[str] = frozenset()
    cardinality: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        for name in self.nodes:
            _check_node_name(name)
        seen = set()
        for parent, child in self.edges:
            if parent not in self.nodes or child not in self.nodes:
                raise GraphError(f"edge {parent}->{child} references undeclared node")
            if parent == child:
                raise GraphError(f"self-loop on {parent}")
            if (parent, child) in seen:
                raise GraphError(f"duplicate edge {parent}->{child}")
            seen.add((parent, child))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        for name in self.hidden | self.conditioned:
            if name not in self.nodes:
                raise GraphError(f"annotation references unknown node {name!r}")
        if self.hidden & self.conditioned:
            bad = sorted(self.hidden & self.conditioned)
            raise GraphError(f"nodes both hidden and conditioned: {bad}")
        for name, card in self.cardinality:
            if name not in self.nodes:
                raise GraphError(f"cardinality for unknown node {name!r}")
            if card < 2:
                raise GraphError(f"cardinality of {name!r} must be >= 2")
        self.topological_order()  # raises on cycles

    # -- basic accessors ---------------------------------------------------

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(p for p, c in self.edges if c == node))

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(sorted(c for p, c in self.edges if p == node))

    @property
    def observed(self) -> frozenset[str]:
        return self.nodes - self.hidden

    def observed_parents(self, node: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents(node) if p not in self.hidden)

    def hidden_parents(self, node: str) -> tuple[str, ...]:
        return tuple(p for p in self.parents(node) if p in self.hidden)

    def card(self, node: str) -> int:
        for name, c in self.cardinality:
            if name == node:
                return c
        return 2

    def topological_order(self) -> tuple[str, ...]:
        """Deterministic topological order (lexicographic among ready nodes)."""
        indeg = {n: 0 for n in self.nodes}
        for _, child in self.edges:
            indeg[child] += 1
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order: list[str] = []
        while ready:
            node = ready.pop(0)
            order.append(node)
            changed = False
            for child in self.children(node):
                indeg[child] -= 1
                if indeg[child] == 0:
                    ready.append(child)
                    changed = True
            if changed:
                ready.sort()
        if len(order) != len(self.nodes):
            raise GraphError("cycle detected")
        return tuple(order)

    def with_hidden(self, names) -> "Dag":
        return Dag(self.nodes, self.edges, frozenset(names) | self.hidden,
                   self.conditioned, self.cardinality)

    def with_conditioned(self, names) -> "Dag":
        return Dag(self.nodes, self.edges, self.hidden,
                   frozenset(names) | self.conditioned, self.cardinality)

    def serialize(self) -> str:
        """Canonical edgelist: edges sorted by (parent, child), comma-joined."""
        return ", ".join(f"{p}->{c}" for p, c in sorted(self.edges))


@dataclass(frozen=True)
class NodeRoleMap:
    """Names the special nodes a parity metric refers to."""

    attribute: str
    outcome: str
    prediction: str
    proxy: str | None = None
    selection: str | None = None
    policy: str | None = None

    def __post_init__(self):
        roles = [r for r in (self.attribute, self.outcome, self.prediction,
                             self.proxy, self.selection, self.policy) if r is not None]
        if len(set(roles)) != len(roles):
            raise GraphError(f"role nodes must be pairwise distinct: {roles}")

    def validate_against(self, dag: Dag) -> None:
        for role in (self.attribute, self.outcome, self.prediction,
                     self.proxy, self.selection, self.policy):
            if role is not None and role not in dag.nodes:
                raise GraphError(f"role node {role!r} not in graph")

    @property
    def observed_outcome(self) -> str:
        """The node the dataset's outcome column refers to (proxy if present)."""
        return self.proxy if self.proxy is not None else self.outcome


def parse_edgelist(text: str) -> Dag:
    """Parse a comma-separated ``X->Y`` edgelist into a Dag.

    Hidden/conditioned annotations are not part of the edgelist; set them
    afterwards with :meth:`Dag.with_hidden` / :meth:`Dag.with_conditioned`.
    """
    if not text or not text.strip():
        raise GraphError("empty edgelist")
    nodes: set[str] = set()
    edges: list[tuple[str, str]] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise GraphError("empty edgelist item")
        if "->" not in item:
            raise GraphError(f"malformed edge {item!r} (missing '->')")
        left, _, right = item.partition("->")
        parent, child = _check_node_name(left.strip()), _check_node_name(right.strip())
        if (parent, child) in edges:
            raise GraphError(f"duplicate edge {parent}->{child}")
        nodes.update((parent, child))
        edges.append((parent, child))
    return Dag(frozenset(nodes), tuple(edges))


def latent_project(dag: Dag, hide=()) -> Dag:
    """Marginalize hidden nodes out of the graph.

    Step 1 reroutes edges around every hidden node (adding Z -> W whenever
    Z -> U -> W passed through hidden U, then cutting U's incoming edges).
    Step 2 deletes any hidden node whose child set is covered by another
    hidden node's child set, breaking ties toward the lexicographically
    smaller survivor. Nodes listed in ``hide`` are treated as hidden in
    addition to ``dag.hidden``; surviving hidden nodes stay marked hidden.
    """
    hide = frozenset(hide)
    unknown = hide - dag.nodes
    if unknown:
        raise GraphError(f"cannot hide unknown nodes: {sorted(unknown)}")
    if hide & dag.conditioned:
        raise GraphError(f"cannot hide conditioned nodes: {sorted(hide & dag.conditioned)}")
    hidden = dag.hidden | hide

    parents = {n: set(dag.parents(n)) for n in dag.nodes}
    children = {n: set(dag.children(n)) for n in dag.nodes}

    # Step 1: one pass in lexicographic order leaves every hidden node parentless.
    for u in sorted(hidden):
        for z in list(parents[u]):
            for w in children[u]:
                if w != z:
                    children[z].add(w)
                    parents[w].add(z)
            children[z].discard(u)
        parents[u] = set()

    # Step 2: drop hidden nodes dominated by another hidden node.
    def dominated(u: str) -> bool:
        for v in hidden:
            if v == u:
                continue
            if children[u] < children[v]:
                return True
            if children[u] == children[v] and v < u:
                return True
        return False

    dropped = {u for u in hidden if dominated(u)}
    keep = dag.nodes - dropped
    edges = tuple(sorted((p, c) for p in keep for c in children[p] if c in keep))
    return Dag(frozenset(keep), edges, hidden - dropped, dag.conditioned,
               tuple((n, c) for n, c in dag.cardinality if n in keep))


def confounded_components(dag: Dag) -> tuple[tuple[str, ...], ...]:
    """Partition observed nodes into blocks sharing a hidden parent.

    Requires a latent-projected graph (all hidden nodes parentless). Blocks
    are sorted by their lexicographically smallest member; nodes without a
    hidden parent form singleton blocks.
    """
    for u in dag.hidden:
        if dag.parents(u):
            raise GraphError(f"hidden node {u!r} has parents; latent-project first")

    parent_of = {n: n for n in dag.observed}

    def find(n):
        while parent_of[n] != n:
            parent_of[n] = parent_of[parent_of[n]]
            n = parent_of[n]
        return n

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent_of[max(ra, rb)] = min(ra, rb)

    for u in sorted(dag.hidden):
        kids = [c for c in dag.children(u) if c not in dag.hidden]
        for first, second in zip(kids, kids[1:]):
            union(first, second)

    groups: dict[str, list[str]] = {}
    for n in sorted(dag.observed):
        groups.setdefault(find(n), []).append(n)
    return tuple(tuple(sorted(g)) for _, g in sorted(groups.items()))
