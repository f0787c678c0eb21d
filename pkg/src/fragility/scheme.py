"""Canonical simplex parameterization of discrete SCMs via response functions.

Every SCM on a latent-projected binary DAG is equivalent to a distribution
over joint response-function choices, one simplex block per confounded
component. Coordinates are ordered lexicographically (block order from
``confounded_components``, nodes sorted within a block, first node most
significant) so compiled polynomials are byte-reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .graph import Dag, GraphError, confounded_components

__all__ = [
    "SchemeError",
    "response_function_count",
    "Block",
    "ResponseScheme",
    "build_scheme",
    "realize",
]


class SchemeError(ValueError):
    """Raised for graphs the v1 parameterization does not cover."""


def response_function_count(node: str, dag: Dag) -> int:
    """Number of deterministic maps from a node's observed-parent values to its value.

    Hidden parents contribute no argument; they select the response function.
    """
    if node in dag.hidden:
        raise SchemeError(f"{node!r} is hidden; hidden nodes carry no response functions")
    if dag.card(node) != 2:
        raise SchemeError(f"{node!r} is not binary; only binary nodes are supported")
    for p in dag.observed_parents(node):
        if dag.card(p) != 2:
            raise SchemeError(f"parent {p!r} of {node!r} is not binary")
    m = len(dag.observed_parents(node))
    return 2 ** (2 ** m)


@dataclass(frozen=True)
class Block:
    nodes: tuple[str, ...]
    dim: int
    offset: int


class ResponseScheme:
    """Coordinate system over per-block response-function distributions."""

    def __init__(self, dag: Dag):
        for u in dag.hidden:
            if dag.parents(u):
                raise SchemeError(f"hidden node {u!r} has parents; latent-project first")
        self.dag = dag
        self.obs_parents = {n: dag.observed_parents(n) for n in sorted(dag.observed)}
        self.n_funcs = {n: response_function_count(n, dag) for n in sorted(dag.observed)}
        blocks = []
        offset = 0
        for nodes in confounded_components(dag):
            dim = 1
            for n in nodes:
                dim *= self.n_funcs[n]
            blocks.append(Block(nodes, dim, offset))
            offset += dim
        self.blocks = tuple(blocks)
        self.total_dim = offset
        self.block_index = {b.nodes: i for i, b in enumerate(self.blocks)}
        self.node_block = {n: i for i, b in enumerate(self.blocks) for n in b.nodes}
        self._topo = tuple(n for n in dag.topological_order() if n in dag.observed)
        # function tables, as value tuples indexed lexicographically over parent values
        self._tables = {
            n: self._build_tables(n) for n in sorted(dag.observed)
        }

    def _build_tables(self, node: str):
        m = len(self.obs_parents[node])
        n_inputs = 2 ** m
        tables = []
        for fidx in range(self.n_funcs[node]):
            tables.append(tuple((fidx >> (n_inputs - 1 - pos)) & 1 for pos in range(n_inputs)))
        return tuple(tables)

    # -- coordinates --------------------------------------------------------

    def coord_index(self, block_i: int, fidx_by_node) -> int:
        block = self.blocks[block_i]
        local = 0
        for n in block.nodes:
            local = local * self.n_funcs[n] + fidx_by_node[n]
        return block.offset + local

    def decode_coord(self, index: int) -> tuple[int, dict[str, int]]:
        for i, block in enumerate(self.blocks):
            if block.offset <= index < block.offset + block.dim:
                local = index - block.offset
                fidx = {}
                for n in reversed(block.nodes):
                    fidx[n] = local % self.n_funcs[n]
                    local //= self.n_funcs[n]
                return i, fidx
        raise IndexError(index)

    def coord_label(self, index: int) -> str:
        _, fidx = self.decode_coord(index)
        return "|".join(f"{n}:{fidx[n]}" for n in sorted(fidx))

    def block_assignments(self, block_i: int):
        """All response-function index tuples of a block, in coordinate order."""
        block = self.blocks[block_i]
        return itertools.product(*(range(self.n_funcs[n]) for n in block.nodes))

    def apply_function(self, node: str, fidx: int, parent_values) -> int:
        pos = 0
        for v in parent_values:
            pos = pos * 2 + v
        return self._tables[node][fidx][pos]

    def describe(self) -> dict:
        return {
            "total_dim": self.total_dim,
            "blocks": [
                {"nodes": list(b.nodes), "dim": b.dim, "offset": b.offset}
                for b in self.blocks
            ],
        }


def build_scheme(dag: Dag) -> ResponseScheme:
    return ResponseScheme(dag)


def realize(scheme: ResponseScheme, assignment, interventions=None) -> dict[str, int]:
    """Evaluate every observed node under a response assignment.

    ``assignment`` maps node -> response-function index. Intervened nodes take
    their forced value; all others apply their response function to realized
    observed-parent values, in topological order (recursive substitution).
    """
    do = dict(interventions or {})
    for node, value in do.items():
        if node not in scheme.dag.observed:
            raise SchemeError(f"cannot intervene on {node!r}")
        if value not in (0, 1):
            raise SchemeError(f"intervention value {value!r} out of domain")
    values: dict[str, int] = {}
    for node in scheme._topo:
        if node in do:
            values[node] = do[node]
        else:
            pv = tuple(values[p] for p in scheme.obs_parents[node])
            values[node] = scheme.apply_function(node, assignment[node], pv)
    return values
