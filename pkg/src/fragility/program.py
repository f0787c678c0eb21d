"""Bias configs and the assembly of sensitivity programs.

A bias config (the JSON format of the external interface) carries the causal
graph, the unobserved/conditioning node lists, the role nodes, and budget
constraints over the reserved symbol ``D``. ``build_program`` turns a config,
an observed count table, a metric, and a budget value into the concrete
polynomial program whose optima bound the metric.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .data import ObservedTable
from .events import (
    Atom,
    EventError,
    ParsedConstraint,
    PolynomialExpr,
    compile_event_poly,
    parse_constraint,
)
from .graph import Dag, GraphError, NodeRoleMap, latent_project, parse_edgelist
from .metrics import MetricError, MetricSpec, metric_terms
from .scheme import ResponseScheme, build_scheme

__all__ = [
    "ConfigError",
    "BiasConfig",
    "load_config",
    "data_constraints",
    "SensitivityProgram",
    "build_program",
    "merge_configs",
]

CONFIG_FIELDS = (
    "dag_str",
    "unob",
    "cond_nodes",
    "attribute_node",
    "outcome_node",
    "prediction_node",
    "constraints",
)

EPS_FEAS = 1e-6

RESERVED_BUDGET = "D"


class ConfigError(ValueError):
    """Raised for malformed bias configs."""


@dataclass(frozen=True)
class BiasConfig:
    dag_str: str
    unob: tuple[str, ...]
    cond_nodes: tuple[str, ...]
    attribute_node: str
    outcome_node: str
    prediction_node: str
    constraints: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "unob", tuple(self.unob))
        object.__setattr__(self, "cond_nodes", tuple(self.cond_nodes))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        try:
            dag = parse_edgelist(self.dag_str)
        except GraphError as exc:
            raise ConfigError(f"dag_str: {exc}") from exc
        if RESERVED_BUDGET in dag.nodes:
            raise ConfigError(f"node name {RESERVED_BUDGET!r} is reserved for the budget")
        for name in self.unob + self.cond_nodes:
            if name not in dag.nodes:
                raise ConfigError(f"unknown node {name!r} in config")
        for role in (self.attribute_node, self.outcome_node, self.prediction_node):
            if role not in dag.nodes:
                raise ConfigError(f"role node {role!r} not in dag_str")
            if role in self.unob:
                raise ConfigError(f"role node {role!r} cannot be unobserved")
        dag = dag.with_hidden(self.unob).with_conditioned(self.cond_nodes)
        for text in self.constraints:
            try:
                parse_constraint(text, dag)
            except EventError as exc:
                raise ConfigError(f"constraint {text!r}: {exc}") from exc

    # -- structure -----------------------------------------------------------

    def graph(self) -> Dag:
        return (
            parse_edgelist(self.dag_str)
            .with_hidden(self.unob)
            .with_conditioned(self.cond_nodes)
        )

    def projected(self) -> Dag:
        return latent_project(self.graph())

    def scheme(self) -> ResponseScheme:
        return build_scheme(self.projected())

    def parsed_constraints(self) -> tuple[ParsedConstraint, ...]:
        dag = self.graph()
        return tuple(parse_constraint(text, dag) for text in self.constraints)

    def infer_proxy(self) -> str | None:
        """The observed stand-in for the outcome, when the graph has one.

        A proxy is the unique child of the outcome node other than the
        prediction and conditioning nodes; datasets measure it in place of
        the outcome itself.
        """
        dag = self.graph()
        excluded = set(self.cond_nodes) | {self.prediction_node} | set(self.unob)
        candidates = [c for c in dag.children(self.outcome_node) if c not in excluded]
        if not candidates:
            return None
        if len(candidates) > 1:
            raise ConfigError(
                f"outcome node has multiple proxy candidates: {sorted(candidates)}"
            )
        return candidates[0]

    def roles(self, policy: str | None = None) -> NodeRoleMap:
        if policy is not None and policy not in self.graph().nodes:
            raise ConfigError(f"policy node {policy!r} not in dag_str")
        roles = NodeRoleMap(
            attribute=self.attribute_node,
            outcome=self.outcome_node,
            prediction=self.prediction_node,
            proxy=self.infer_proxy(),
            selection=self.cond_nodes[0] if self.cond_nodes else None,
            policy=policy,
        )
        roles.validate_against(self.graph())
        return roles

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dag_str": self.dag_str,
            "unob": list(self.unob),
            "cond_nodes": list(self.cond_nodes),
            "attribute_node": self.attribute_node,
            "outcome_node": self.outcome_node,
            "prediction_node": self.prediction_node,
            "constraints": list(self.constraints),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)

    def config_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def load_config(text: str) -> BiasConfig:
    """Parse and validate bias-config JSON; unknown fields are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    missing = [f for f in CONFIG_FIELDS if f not in raw]
    unknown = [f for f in raw if f not in CONFIG_FIELDS]
    if missing:
        raise ConfigError(f"missing fields: {missing}")
    if unknown:
        raise ConfigError(f"unknown fields: {unknown}")
    for name in ("unob", "cond_nodes", "constraints"):
        if not isinstance(raw[name], list) or not all(isinstance(x, str) for x in raw[name]):
            raise ConfigError(f"{name} must be a list of strings")
    for name in ("dag_str", "attribute_node", "outcome_node", "prediction_node"):
        if not isinstance(raw[name], str):
            raise ConfigError(f"{name} must be a string")
    return BiasConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})


# ---------------------------------------------------------------------------
# Data constraints
# ---------------------------------------------------------------------------


def data_constraints(
    scheme: ResponseScheme,
    table: ObservedTable,
    cond_nodes=(),
    roles: NodeRoleMap | None = None,
) -> tuple[PolynomialExpr, ...]:
    """Equalities pinning compiled cell probabilities to observed frequencies.

    Without conditioning each cell's polynomial is pinned directly; with
    conditioning nodes the denominators are cleared:
    P(cell & S=1) - f(cell) * P(S=1) = 0.
    """
    if roles is None:
        raise ConfigError("data_constraints requires a role map")
    a_node, y_node, p_node = roles.attribute, roles.observed_outcome, roles.prediction
    cond_atoms = tuple(Atom(s, 1) for s in cond_nodes)
    cond_poly = compile_event_poly(scheme, cond_atoms) if cond_atoms else None
    out = []
    freq = table.frequencies()
    for cell in sorted(freq):
        a, y, p = cell
        atoms = (Atom(a_node, a), Atom(y_node, y), Atom(p_node, p)) + cond_atoms
        cell_poly = compile_event_poly(scheme, atoms)
        if cond_poly is None:
            out.append(cell_poly - PolynomialExpr.const(freq[cell]))
        else:
            out.append(cell_poly - cond_poly.scale(freq[cell]))
    return tuple(out)


# ---------------------------------------------------------------------------
# Sensitivity programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SensitivityProgram:
    """Objective and polynomial constraints over a scheme's coordinates.

    The objective is stored as signed fraction terms (giving the solver a
    low-degree epigraph form); ``objective_terms`` holds one term list for
    scalar metrics and two for EO-style pairs. All equalities are understood
    as relaxed to |g| <= eps_feas inside the solver; inequalities are
    ``poly <= 0``. ``pinned`` coordinates are fixed to zero.
    """

    scheme: ResponseScheme
    metric: MetricSpec
    objective_terms: tuple
    sense: str
    equalities: tuple[PolynomialExpr, ...]
    inequalities: tuple[PolynomialExpr, ...]
    pinned: tuple[int, ...]
    delta: tuple[tuple[str, float], ...]
    eps_feas: float = EPS_FEAS
    metadata: tuple[tuple[str, str], ...] = ()
    observed: tuple = ()  # ((a, y, p), Fraction) frequency pairs
    cond_nodes: tuple[str, ...] = ()

    @property
    def is_pair(self) -> bool:
        return self.metric.is_pair

    def canonical_bytes(self) -> bytes:
        parts = [f"metric={self.metric.name} sense={self.sense} eps={self.eps_feas!r}"]
        parts.append("delta=" + ",".join(f"{k}:{v!r}" for k, v in self.delta))
        parts.append("pinned=" + ",".join(map(str, self.pinned)))
        terms = self.objective_terms if self.is_pair else (self.objective_terms,)
        for part in terms:
            for coef, frac in part:
                parts.append(f"obj {coef} {frac.serialize()}")
        for eq in self.equalities:
            parts.append("eq " + eq.serialize())
        for ineq in self.inequalities:
            parts.append("le " + ineq.serialize())
        for key, value in self.metadata:
            parts.append(f"meta {key}={value}")
        return "\n".join(parts).encode()

    def program_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()


def _defier_pins(scheme: ResponseScheme, outcome: str, policy: str) -> tuple[int, ...]:
    """Coordinates whose outcome response decreases when the policy turns on."""
    parents = scheme.obs_parents[outcome]
    if policy not in parents:
        raise ConfigError(f"policy {policy!r} is not an observed parent of {outcome!r}")
    t_pos = parents.index(policy)
    others = [i for i in range(len(parents)) if i != t_pos]

    def is_defier(fidx: int) -> bool:
        import itertools

        for combo in itertools.product((0, 1), repeat=len(others)):
            values = [0] * len(parents)
            for slot, v in zip(others, combo):
                values[slot] = v
            values[t_pos] = 0
            y0 = scheme.apply_function(outcome, fidx, tuple(values))
            values[t_pos] = 1
            y1 = scheme.apply_function(outcome, fidx, tuple(values))
            if y1 < y0:
                return True
        return False

    defiers = {f for f in range(scheme.n_funcs[outcome]) if is_defier(f)}
    block_i = scheme.node_block[outcome]
    pins = []
    for local, combo in enumerate(scheme.block_assignments(block_i)):
        fidx = dict(zip(scheme.blocks[block_i].nodes, combo))
        if fidx[outcome] in defiers:
            pins.append(scheme.blocks[block_i].offset + local)
    return tuple(pins)


def _as_metric_spec(metric, config: BiasConfig, policy: str | None) -> MetricSpec:
    if isinstance(metric, MetricSpec):
        roles = metric.roles
        if (roles.attribute, roles.outcome, roles.prediction) != (
            config.attribute_node,
            config.outcome_node,
            config.prediction_node,
        ):
            raise MetricError("metric roles do not match the config's role nodes")
        return metric
    needs_policy = str(metric).startswith("CF_")
    roles = config.roles(policy=policy if (policy and needs_policy) else None)
    return MetricSpec(str(metric), roles)


def build_program(
    config: BiasConfig,
    table: ObservedTable,
    metric,
    delta: float,
    sense: str = "both",
    policy: str | None = None,
    second: tuple[BiasConfig, float] | None = None,
    group: int = 0,
    eps_feas: float = EPS_FEAS,
) -> SensitivityProgram:
    """Assemble the polynomial program bounding ``metric`` at budget ``delta``.

    ``second`` optionally adds a second bias config with its own budget,
    merged into a single graph (two-bias analysis). ``policy`` names the
    treatment node for counterfactual metrics (monotone by assumption:
    response functions with Y(policy=1) < Y(policy=0) carry zero mass).
    """
    if not 0.0 <= float(delta) <= 1.0:
        raise ConfigError(f"delta {delta} outside [0, 1]")
    if sense not in ("min", "max", "both"):
        raise ConfigError(f"bad sense {sense!r}")

    deltas = [("delta", float(delta))]
    if second is not None:
        second_config, delta2 = second
        if not 0.0 <= float(delta2) <= 1.0:
            raise ConfigError(f"second delta {delta2} outside [0, 1]")
        merged, split = merge_configs(config, second_config)
        constraint_deltas = [
            Fraction(delta).limit_denominator(10**12) if owner == 0
            else Fraction(delta2).limit_denominator(10**12)
            for owner in split
        ]
        config_for_build = merged
        deltas.append(("second_delta", float(delta2)))
    else:
        config_for_build = config
        constraint_deltas = [Fraction(delta).limit_denominator(10**12)] * len(
            config.constraints
        )

    if isinstance(metric, MetricSpec) and metric.roles.policy:
        policy = metric.roles.policy
    scheme = config_for_build.scheme()
    spec = _as_metric_spec(metric, config_for_build, policy)
    if group:
        spec = MetricSpec(spec.name, spec.roles, spec.signed, group)
    spec.roles.validate_against(scheme.dag)

    terms = metric_terms(spec, scheme)

    equalities = list(
        data_constraints(scheme, table, config_for_build.cond_nodes, spec.roles)
    )
    inequalities: list[PolynomialExpr] = []
    for parsed, dval in zip(config_for_build.parsed_constraints(), constraint_deltas):
        poly, csense = parsed.compile(scheme, dval)
        if csense == "eq":
            equalities.append(poly)
        else:
            inequalities.append(poly)

    pinned: tuple[int, ...] = ()
    if spec.roles.policy is not None:
        pinned = _defier_pins(scheme, spec.roles.outcome, spec.roles.policy)

    meta = (
        ("metric", spec.name),
        ("config_hash", config_for_build.config_hash()),
    )
    return SensitivityProgram(
        scheme=scheme,
        metric=spec,
        objective_terms=terms,
        sense=sense,
        equalities=tuple(equalities),
        inequalities=tuple(inequalities),
        pinned=pinned,
        delta=tuple(deltas),
        eps_feas=eps_feas,
        metadata=meta,
        observed=tuple(sorted(table.frequencies().items())),
        cond_nodes=tuple(config_for_build.cond_nodes),
    )


# ---------------------------------------------------------------------------
# Two-bias merging
# ---------------------------------------------------------------------------


def merge_configs(primary: BiasConfig, second: BiasConfig) -> tuple[BiasConfig, tuple[int, ...]]:
    """Union of two bias structures over shared role nodes.

    The second config's role nodes are renamed onto the primary's; remaining
    shared names (e.g. a confounder U) refer to the same node, which matches
    a single latent covariate source driving both biases. Returns the merged
    config and, per merged constraint, the index (0/1) of the config whose
    budget value applies.
    """
    mapping = {
        second.attribute_node: primary.attribute_node,
        second.outcome_node: primary.outcome_node,
        second.prediction_node: primary.prediction_node,
    }
    primary_dag = primary.graph()
    # avoid accidental capture of a primary role name by an unrelated node
    role_names = {primary.attribute_node, primary.outcome_node, primary.prediction_node}
    second_dag = second.graph()
    for node in sorted(second_dag.nodes):
        if node in mapping:
            continue
        if node in role_names:
            fresh = node
            while fresh in primary_dag.nodes or fresh in mapping.values():
                fresh += "2"
            mapping[node] = fresh

    def rename(n: str) -> str:
        return mapping.get(n, n)

    edges = {(p, c) for p, c in primary_dag.edges}
    edges |= {(rename(p), rename(c)) for p, c in second_dag.edges}
    dag_str = ", ".join(f"{p}->{c}" for p, c in sorted(edges))

    unob = tuple(sorted(set(primary.unob) | {rename(u) for u in second.unob}))
    cond = tuple(sorted(set(primary.cond_nodes) | {rename(s) for s in second.cond_nodes}))

    renamed_constraints = [
        parsed.rename(mapping).text for parsed in second.parsed_constraints()
    ]
    constraints = tuple(primary.constraints) + tuple(renamed_constraints)
    owners = tuple([0] * len(primary.constraints) + [1] * len(renamed_constraints))

    merged = BiasConfig(
        dag_str=dag_str,
        unob=unob,
        cond_nodes=cond,
        attribute_node=primary.attribute_node,
        outcome_node=primary.outcome_node,
        prediction_node=primary.prediction_node,
        constraints=constraints,
    )
    return merged, owners
