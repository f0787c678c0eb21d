import pytest
from hypothesis import given, settings, strategies as st

from fragility.graph import (
    Dag,
    GraphError,
    NodeRoleMap,
    confounded_components,
    latent_project,
    parse_edgelist,
)


def test_parse_selection_edgelist():
    dag = parse_edgelist("A->Y, A->P, A->S, U->P, U->Y, U->S, Y->S")
    assert dag.nodes == frozenset({"A", "Y", "P", "S", "U"})
    assert len(dag.edges) == 7
    assert dag.hidden == frozenset()
    assert dag.conditioned == frozenset()


@pytest.mark.parametrize("text", ["A->A", "A->Y, Y->A", "A->Y, Y->B, B->A"])
def test_parse_rejects_cycles(text):
    with pytest.raises(GraphError):
        parse_edgelist(text)


@pytest.mark.parametrize("text", ["", "  ", "A-Y", "A->", "A->Y, A->Y", "A->Y,,B->C"])
def test_parse_rejects_malformed(text):
    with pytest.raises(GraphError):
        parse_edgelist(text)


def test_bad_node_names_rejected():
    with pytest.raises(GraphError):
        parse_edgelist("1A->Y")
    with pytest.raises(GraphError):
        Dag(frozenset({"a b"}), ())


def test_serialize_roundtrip_is_identity():
    dag = parse_edgelist("U->Y, A->Y, A->P, U->P")
    again = parse_edgelist(dag.serialize())
    assert again.nodes == dag.nodes
    assert again.edges == dag.edges
    assert dag.serialize() == "A->P, A->Y, U->P, U->Y"


def test_hidden_conditioned_disjoint():
    dag = parse_edgelist("A->S")
    with pytest.raises(GraphError):
        dag.with_hidden(["S"]).with_conditioned(["S"])


def test_latent_project_step_one():
    # Fig-style: X1 -> U, X2 -> U, U -> {X3, X4, X5}, with U hidden.
    dag = parse_edgelist("X1->U, X2->U, U->X3, U->X4, U->X5").with_hidden(["U"])
    out = latent_project(dag)
    assert out.hidden == frozenset({"U"})
    assert out.parents("U") == ()
    for child in ("X3", "X4", "X5"):
        assert set(out.parents(child)) == {"U", "X1", "X2"}


def test_latent_project_step_two_deletes_dominated():
    dag = parse_edgelist("U1->X3, U1->X4, U1->X5, U2->X3, U2->X4").with_hidden(["U1", "U2"])
    out = latent_project(dag)
    assert "U2" not in out.nodes
    assert out.hidden == frozenset({"U1"})
    assert out.serialize() == "U1->X3, U1->X4, U1->X5"


def test_latent_project_equal_children_keeps_lexicographic_smaller():
    dag = parse_edgelist("U1->X, U1->Y, U2->X, U2->Y").with_hidden(["U1", "U2"])
    out = latent_project(dag)
    assert out.hidden == frozenset({"U1"})


def _proxy_full_graph(dashed: bool) -> Dag:
    edges = "A->X, A->Z, A->P, A->Y, X->Z, X->P, Z->Y"
    if dashed:
        edges += ", X->Y"
    return parse_edgelist(edges)


@pytest.mark.parametrize("dashed", [False, True])
def test_project_proxy_graph_over_covariates(dashed):
    out = latent_project(_proxy_full_graph(dashed), hide=["X"])
    assert out.hidden == frozenset({"X"})
    assert set(out.children("X")) == ({"P", "Z", "Y"} if dashed else {"P", "Z"})
    assert ("A", "Z") in out.edges and ("A", "P") in out.edges
    assert ("A", "Y") in out.edges and ("Z", "Y") in out.edges


def test_prop_b1_extra_latent_changes_nothing():
    # An extra hidden source that does not cause A and has no arrow into the
    # prediction collapses into the X-derived confounder.
    base = latent_project(_proxy_full_graph(True), hide=["X"])
    extra = parse_edgelist(
        "A->X, A->Z, A->P, A->Y, X->Z, X->P, Z->Y, X->Y, W->Z, W->Y"
    )
    out = latent_project(extra, hide=["X", "W"])
    assert "W" not in out.nodes
    assert out.edges == base.edges
    assert out.hidden == base.hidden


def test_latent_project_idempotent():
    dag = parse_edgelist("A->Y, A->P, A->S, U->P, U->Y, U->S, Y->S").with_hidden(["U"])
    once = latent_project(dag)
    twice = latent_project(once)
    assert once == twice


def test_latent_project_rejects_unknown_or_conditioned():
    dag = parse_edgelist("A->Y").with_conditioned(["Y"])
    with pytest.raises(GraphError):
        latent_project(dag, hide=["Q"])
    with pytest.raises(GraphError):
        latent_project(dag, hide=["Y"])


def test_confounded_components_proxy_no_dash():
    dag = parse_edgelist("A->Z, A->P, A->Y, Z->Y, U->Z, U->P").with_hidden(["U"])
    assert confounded_components(dag) == (("A",), ("P", "Z"), ("Y",))


def test_confounded_components_selection():
    dag = parse_edgelist("A->Y, A->P, A->S, U->P, U->Y, U->S, Y->S").with_hidden(["U"])
    assert confounded_components(dag) == (("A",), ("P", "S", "Y"))


def test_confounded_components_no_hidden_all_singletons():
    dag = parse_edgelist("A->B, B->C, A->C")
    assert confounded_components(dag) == (("A",), ("B",), ("C",))


def test_confounded_components_requires_projection():
    dag = parse_edgelist("A->U, U->Y").with_hidden(["U"])
    with pytest.raises(GraphError):
        confounded_components(dag)


def test_components_form_partition():
    dag = parse_edgelist(
        "A->Y, A->P, U1->Y, U1->P, U2->P, U2->S, A->S, B->S"
    ).with_hidden(["U1", "U2"])
    projected = latent_project(dag)
    blocks = confounded_components(projected)
    seen = [n for b in blocks for n in b]
    assert sorted(seen) == sorted(projected.observed)
    assert len(seen) == len(set(seen))


def test_role_map_validation():
    dag = parse_edgelist("A->Y, A->P")
    roles = NodeRoleMap(attribute="A", outcome="Y", prediction="P")
    roles.validate_against(dag)
    with pytest.raises(GraphError):
        NodeRoleMap(attribute="A", outcome="A", prediction="P")
    with pytest.raises(GraphError):
        NodeRoleMap(attribute="A", outcome="Y", prediction="Q").validate_against(dag)


@st.composite
def random_dags(draw):
    n = draw(st.integers(min_value=2, max_value=6))
    names = [f"N{i}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if draw(st.booleans()):
                edges.append((names[i], names[j]))
    return Dag(frozenset(names), tuple(edges))


@settings(max_examples=60, deadline=None)
@given(random_dags())
def test_parse_serialize_roundtrip_property(dag):
    if not dag.edges:
        return
    # serialization only carries edge-connected structure
    again = parse_edgelist(dag.serialize())
    assert again.edges == dag.edges
    assert again.serialize() == dag.serialize()


@settings(max_examples=40, deadline=None)
@given(random_dags(), st.data())
def test_projection_idempotent_property(dag, data):
    hide = data.draw(st.sets(st.sampled_from(sorted(dag.nodes)), max_size=2))
    projected = latent_project(dag.with_hidden(hide))
    assert latent_project(projected) == projected
