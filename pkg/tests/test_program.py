import json
from fractions import Fraction

import numpy as np
import pytest

from fragility.configs import BUILTIN_CONFIGS, builtin_config, builtin_config_text
from fragility.data import ObservedTable, TableError
from fragility.events import PolynomialExpr, evaluate
from fragility.program import (
    BiasConfig,
    ConfigError,
    build_program,
    data_constraints,
    load_config,
    merge_configs,
)

SELECTION_JSON = """{
    "dag_str": "A->Y, A->P, A->S, U->P, U->Y, U->S, Y->S",
    "unob": ["U"],
    "cond_nodes": ["S"],
    "attribute_node": "A",
    "outcome_node": "Y",
    "prediction_node": "P",
    "constraints": ["P(S = 1) >= 1 - D"]
}"""

TABLE = ObservedTable.from_counts(
    {(0, 0, 0): 300, (0, 0, 1): 150, (0, 1, 0): 100, (0, 1, 1): 200,
     (1, 0, 0): 250, (1, 0, 1): 150, (1, 1, 0): 150, (1, 1, 1): 200}
)


def test_load_selection_config():
    config = load_config(SELECTION_JSON)
    assert config.cond_nodes == ("S",)
    assert config.constraints == ("P(S = 1) >= 1 - D",)
    assert config.roles().selection == "S"
    assert config.roles().proxy is None


def test_roundtrip_is_stable():
    config = load_config(SELECTION_JSON)
    again = load_config(config.to_json())
    assert again == config
    assert json.loads(config.to_json()) == json.loads(SELECTION_JSON)


def test_proxy_config_outcome_and_inferred_proxy():
    config = builtin_config("proxy")
    assert config.outcome_node == "Z"
    assert config.roles().proxy == "Y"
    assert config.roles().observed_outcome == "Y"


@pytest.mark.parametrize("mutate", [
    lambda raw: raw.pop("unob"),
    lambda raw: raw.update(extra=1),
    lambda raw: raw.update(prediction_node="Q"),
    lambda raw: raw.update(constraints=["P(S = 1) >= 1 -"]),
    lambda raw: raw.update(dag_str="A->A"),
    lambda raw: raw.update(unob=["A"]),
])
def test_load_config_rejects(mutate):
    raw = json.loads(SELECTION_JSON)
    mutate(raw)
    with pytest.raises(ConfigError):
        load_config(json.dumps(raw))


def test_config_missing_prediction_in_dag():
    raw = json.loads(SELECTION_JSON)
    raw["dag_str"] = "A->Y, A->S, U->Y, U->S, Y->S"
    with pytest.raises(ConfigError):
        load_config(json.dumps(raw))


def test_builtin_configs_all_load():
    for name in BUILTIN_CONFIGS:
        config = builtin_config(name)
        assert config.scheme().total_dim > 0


def test_observed_table_validation():
    with pytest.raises(TableError):
        ObservedTable.from_counts({})
    with pytest.raises(TableError):
        ObservedTable.from_counts({(0, 0, 2): 5})
    with pytest.raises(TableError):
        ObservedTable.from_counts({(0, 0, 0): -1})
    table = ObservedTable.from_counts({(0, 0, 0): 4})
    assert table.total == 4
    assert len(table.counts) == 8


def test_data_constraints_unconditional_pin_cells():
    config = builtin_config("proxy")
    scheme = config.scheme()
    eqs = data_constraints(scheme, TABLE, (), config.roles())
    assert len(eqs) == 8
    from fragility.solver.relax import natural_start

    program = build_program(config, TABLE, "DP", 0.1)
    point = natural_start(program)
    for eq in eqs:
        assert abs(eq.evaluate(point)) < 1e-12


def test_data_constraints_conditional_clear_denominator():
    config = builtin_config("selection")
    scheme = config.scheme()
    eqs = data_constraints(scheme, TABLE, ("S",), config.roles())
    # at the select-everyone natural point the conditional equals the joint
    program = build_program(config, TABLE, "DP", 0.1)
    from fragility.solver.relax import natural_start

    point = natural_start(program)
    for eq in eqs:
        assert abs(eq.evaluate(point)) < 1e-12


def test_uniform_table_pins_cells_to_eighth():
    config = builtin_config("proxy")
    scheme = config.scheme()
    uniform = ObservedTable.from_counts({c: 5 for c in TABLE.frequencies()})
    eqs = data_constraints(scheme, uniform, (), config.roles())
    for eq in eqs:
        assert eq.terms.get((), None) == Fraction(-1, 8)


def test_build_program_structure():
    program = build_program(builtin_config("selection"), TABLE, "FPRP", 0.05)
    assert program.sense == "both"
    assert len(program.equalities) == 8
    assert len(program.inequalities) == 1
    assert program.pinned == ()
    assert dict(program.delta)["delta"] == 0.05
    assert program.metric.name == "FPRP"


def test_build_program_rejects_bad_inputs():
    config = builtin_config("selection")
    with pytest.raises(ConfigError):
        build_program(config, TABLE, "DP", 1.5)
    with pytest.raises(ConfigError):
        build_program(config, TABLE, "DP", 0.1, sense="sideways")


def test_ecp_program_pins_defiers():
    program = build_program(builtin_config("ecp"), TABLE, "CF_FPRP", 0.1, policy="T")
    scheme = program.scheme
    assert len(program.pinned) > 0
    # every pinned coordinate has an outcome response that decreases in T
    for coord in program.pinned:
        _, fidx = scheme.decode_coord(coord)
        f = fidx["Y"]
        defies = False
        for a in (0, 1):
            y0 = scheme.apply_function("Y", f, (a, 0))
            y1 = scheme.apply_function("Y", f, (a, 1))
            if y1 < y0:
                defies = True
        assert defies
    # and none of the unpinned outcome responses defy
    block_i = scheme.node_block["Y"]
    block = scheme.blocks[block_i]
    pinned = set(program.pinned)
    for local in range(block.dim):
        coord = block.offset + local
        if coord in pinned:
            continue
        _, fidx = scheme.decode_coord(coord)
        for a in (0, 1):
            y0 = scheme.apply_function("Y", fidx["Y"], (a, 0))
            y1 = scheme.apply_function("Y", fidx["Y"], (a, 1))
            assert y1 >= y0


def test_program_bytes_deterministic():
    a = build_program(builtin_config("proxy"), TABLE, "PPP", 0.03)
    b = build_program(builtin_config("proxy"), TABLE, "PPP", 0.03)
    assert a.canonical_bytes() == b.canonical_bytes()
    c = build_program(builtin_config("proxy"), TABLE, "PPP", 0.04)
    assert a.canonical_bytes() != c.canonical_bytes()


def test_feasible_set_nesting_in_delta():
    # constraints are one-sided in the budget: smaller delta implies the
    # larger-delta inequality pointwise
    config = builtin_config("selection")
    small = build_program(config, TABLE, "DP", 0.01)
    large = build_program(config, TABLE, "DP", 0.05)
    from fragility.solver.relax import natural_start

    point = natural_start(small)
    rng = np.random.default_rng(0)
    for _ in range(50):
        noise = rng.dirichlet(np.ones(small.scheme.total_dim))
        x = 0.7 * point + 0.3 * noise
        # renormalize blocks
        for block in small.scheme.blocks:
            seg = x[block.offset:block.offset + block.dim]
            x[block.offset:block.offset + block.dim] = seg / seg.sum()
        small_ok = all(h.evaluate(x) <= 1e-12 for h in small.inequalities)
        if small_ok:
            assert all(h.evaluate(x) <= 1e-12 for h in large.inequalities)


def test_merge_configs_two_bias():
    merged, owners = merge_configs(builtin_config("proxy"), builtin_config("selection"))
    assert owners == (0, 1)
    dag = merged.graph()
    assert "S" in dag.nodes and "Z" in dag.nodes
    assert ("Z", "S") in dag.edges  # selection reads the true outcome
    assert merged.cond_nodes == ("S",)
    assert merged.roles().proxy == "Y"
    program = build_program(
        builtin_config("proxy"), TABLE, "FPRP", 0.02,
        second=(builtin_config("selection"), 0.03),
    )
    deltas = dict(program.delta)
    assert deltas == {"delta": 0.02, "second_delta": 0.03}
    assert len(program.inequalities) == 2


def test_merge_renames_second_roles():
    second = BiasConfig(
        dag_str="A->O, A->P, O->S, A->S",
        unob=(),
        cond_nodes=("S",),
        attribute_node="A",
        outcome_node="O",
        prediction_node="P",
        constraints=("P(S = 1) >= 1 - D",),
    )
    merged, _ = merge_configs(builtin_config("proxy"), second)
    assert "O" not in merged.graph().nodes
    assert ("Z", "S") in merged.graph().edges
