import itertools

import numpy as np
import pytest

from fragility.data import ObservedTable
from fragility.events import evaluate
from fragility.graph import NodeRoleMap, latent_project, parse_edgelist
from fragility.metrics import (
    MetricError,
    MetricSpec,
    abs_interval,
    empirical_metric,
    evaluate_metric,
    metric_events,
    metric_expression,
    metric_terms,
)
from fragility.scheme import build_scheme

ROLES = NodeRoleMap(attribute="A", outcome="Y", prediction="P")
ECP_ROLES = NodeRoleMap(attribute="A", outcome="Y", prediction="P", policy="T")


def simple_scheme():
    return build_scheme(parse_edgelist("A->Y, A->P, Y->P"))


def ecp_scheme():
    dag = parse_edgelist("A->T, A->Y, A->P, T->Y, U->P, U->Y, U->T")
    return build_scheme(latent_project(dag.with_hidden(["U"])))


def point_from_joint(scheme, joint):
    """Scheme point whose independent response draws reproduce a target joint.

    ``joint[(a, y, p)]`` over the simple A->Y, A->P, Y->P graph: uses
    per-node conditional response mixtures; only valid for distributions
    where Y and P draw independently given their parents, which is enough
    for plug-in comparisons.
    """
    pa1 = sum(v for (a, y, p), v in joint.items() if a == 1)
    point = np.zeros(scheme.total_dim)
    point[0], point[1] = 1 - pa1, pa1

    def cond(y_given_a):
        # distribution over Y's 4 response tables from P(Y=1|A=a)
        q0, q1 = y_given_a
        return np.array(
            [(1 - q0) * (1 - q1), (1 - q0) * q1, q0 * (1 - q1), q0 * q1]
        )

    def p_y1(a):
        den = sum(v for (aa, y, p), v in joint.items() if aa == a)
        num = sum(v for (aa, y, p), v in joint.items() if aa == a and y == 1)
        return num / den if den else 0.0

    yb = scheme.blocks[2]
    point[yb.offset : yb.offset + 4] = cond((p_y1(0), p_y1(1)))

    def p_p1(a, y):
        den = sum(v for (aa, yy, p), v in joint.items() if aa == a and yy == y)
        num = sum(v for (aa, yy, p), v in joint.items() if aa == a and yy == y and p == 1)
        return num / den if den else 0.0

    pb = scheme.blocks[1]
    probs = [p_p1(a, y) for (a, y) in [(0, 0), (0, 1), (1, 0), (1, 1)]]
    dist = np.zeros(16)
    for fidx in range(16):
        bits = [(fidx >> (3 - k)) & 1 for k in range(4)]
        w = 1.0
        for bit, q in zip(bits, probs):
            w *= q if bit else (1 - q)
        dist[fidx] = w
    point[pb.offset : pb.offset + 16] = dist
    return point


UNIFORMISH = {
    (0, 0, 0): 0.15, (0, 0, 1): 0.10, (0, 1, 0): 0.05, (0, 1, 1): 0.20,
    (1, 0, 0): 0.10, (1, 0, 1): 0.15, (1, 1, 0): 0.12, (1, 1, 1): 0.13,
}


def table_from_joint(joint, total=10000):
    return ObservedTable.from_counts({c: round(v * total) for c, v in joint.items()})


@pytest.mark.parametrize("name", ["DP", "FPRP", "FNRP", "PPP", "NPP"])
def test_compiled_matches_empirical_plugin(name):
    scheme = simple_scheme()
    spec = MetricSpec(name, ROLES)
    point = point_from_joint(scheme, UNIFORMISH)
    table = table_from_joint(UNIFORMISH)
    compiled = evaluate(metric_expression(spec, scheme), point)
    assert compiled == pytest.approx(empirical_metric(table, spec), abs=1e-10)


def test_eo_pair_and_empirical():
    scheme = simple_scheme()
    spec = MetricSpec("EO", ROLES)
    pair = metric_expression(spec, scheme)
    assert isinstance(pair, tuple) and len(pair) == 2
    point = point_from_joint(scheme, UNIFORMISH)
    fpr = evaluate(pair[0], point)
    fnr = evaluate(pair[1], point)
    table = table_from_joint(UNIFORMISH)
    assert max(abs(fpr), abs(fnr)) == pytest.approx(empirical_metric(table, spec), abs=1e-10)


def test_fprp_on_deterministic_model():
    # prediction equals the attribute, outcome always 0: the measured-as
    # difference evaluates to 0 - 1 = -1.
    scheme = simple_scheme()
    joint = {(0, 0, 0): 0.5, (1, 0, 1): 0.5}
    point = point_from_joint(scheme, joint)
    spec = MetricSpec("FPRP", ROLES)
    assert evaluate(metric_expression(spec, scheme), point) == pytest.approx(-1.0)


def test_dp_zero_on_symmetric_model():
    scheme = simple_scheme()
    joint = {
        (0, 0, 0): 0.15, (0, 0, 1): 0.10, (0, 1, 0): 0.05, (0, 1, 1): 0.20,
        (1, 0, 0): 0.15, (1, 0, 1): 0.10, (1, 1, 0): 0.05, (1, 1, 1): 0.20,
    }
    point = point_from_joint(scheme, joint)
    assert evaluate(metric_expression(MetricSpec("DP", ROLES), scheme), point) == pytest.approx(0.0)


def test_empirical_examples_from_counts():
    perfect = ObservedTable.from_counts(
        {(0, 0, 0): 25, (0, 1, 1): 25, (1, 0, 0): 25, (1, 1, 1): 25}
    )
    assert empirical_metric(perfect, MetricSpec("FPRP", ROLES)) == 0.0

    yhat_is_a = ObservedTable.from_counts(
        {(0, 0, 0): 30, (0, 1, 0): 20, (1, 0, 1): 30, (1, 1, 1): 20}
    )
    assert empirical_metric(yhat_is_a, MetricSpec("DP", ROLES)) == -1.0

    counts = {
        (0, 0, 0): 40, (0, 0, 1): 25, (0, 1, 0): 20, (0, 1, 1): 15,
        (1, 0, 0): 25, (1, 0, 1): 35, (1, 1, 0): 15, (1, 1, 1): 25,
    }
    table = ObservedTable.from_counts(counts)
    assert empirical_metric(table, MetricSpec("DP", ROLES)) == pytest.approx(0.4 - 0.6)


def test_te_zero_without_path():
    # P has no A ancestor: intervening on A cannot move it.
    scheme = build_scheme(parse_edgelist("A->Y, Y->S, B->P"))
    roles = NodeRoleMap(attribute="A", outcome="Y", prediction="P")
    expr = metric_expression(MetricSpec("TE", roles), scheme)
    assert expr.num.is_zero


def test_cf_zero_iff_no_attribute_sensitive_mass():
    scheme = ecp_scheme()
    spec = MetricSpec("CF", ECP_ROLES)
    rng = np.random.default_rng(3)
    block = scheme.blocks[1]  # {P, T, Y} confounded block
    # P response indices 1 (identity in A) and 2 (negation) are A-sensitive.
    for _ in range(20):
        point = np.zeros(scheme.total_dim)
        point[:2] = rng.dirichlet(np.ones(2))
        point[block.offset : block.offset + block.dim] = rng.dirichlet(np.ones(block.dim))
        value = evaluate_metric(spec, scheme, point)
        sensitive = 0.0
        for local in range(block.dim):
            _, fidx = scheme.decode_coord(block.offset + local)
            if fidx["P"] in (1, 2):
                sensitive += point[block.offset + local]
        assert (value < 1e-12) == (sensitive < 1e-12)


def test_cf_metrics_require_policy():
    with pytest.raises(MetricError):
        MetricSpec("CF_FPRP", ROLES)


def test_antisymmetry_under_group_swap():
    scheme = simple_scheme()
    rng = np.random.default_rng(11)
    for name in ("DP", "FPRP", "FNRP", "PPP", "NPP"):
        spec = MetricSpec(name, ROLES)
        swapped = metric_events(spec, groups=(1, 0))
        normal = metric_events(spec)
        from fragility.events import compile_probability

        point = point_from_joint(
            scheme,
            {c: v for c, v in zip(UNIFORMISH, rng.dirichlet(np.ones(8)))},
        )
        val = sum(float(c) * evaluate(compile_probability(scheme, e), point) for c, e in normal)
        rev = sum(float(c) * evaluate(compile_probability(scheme, e), point) for c, e in swapped)
        assert val == pytest.approx(-rev, abs=1e-10)


def test_empirical_rejects_counterfactual_and_null_cells():
    table = table_from_joint(UNIFORMISH)
    with pytest.raises(MetricError):
        empirical_metric(table, MetricSpec("CF", ROLES))
    degenerate = ObservedTable.from_counts({(0, 0, 0): 10, (1, 0, 0): 10})
    with pytest.raises(MetricError):
        empirical_metric(degenerate, MetricSpec("PPP", ROLES))


def test_rate_statistics():
    table = ObservedTable.from_counts(
        {(0, 0, 0): 40, (0, 0, 1): 30, (0, 1, 0): 10, (0, 1, 1): 20,
         (1, 0, 0): 40, (1, 0, 1): 30, (1, 1, 0): 10, (1, 1, 1): 20}
    )
    assert empirical_metric(table, MetricSpec("FPR", ROLES, group=0)) == pytest.approx(30 / 70)
    assert empirical_metric(table, MetricSpec("FNR", ROLES, group=0)) == pytest.approx(10 / 30)
    assert empirical_metric(table, MetricSpec("PPV", ROLES, group=1)) == pytest.approx(20 / 50)


def test_abs_interval_rule():
    assert abs_interval(-0.3, 0.5) == (0.0, 0.5)
    assert abs_interval(0.2, 0.5) == (0.2, 0.5)
    assert abs_interval(-0.5, -0.2) == (0.2, 0.5)


def test_unsigned_metric():
    table = table_from_joint(UNIFORMISH)
    signed = empirical_metric(table, MetricSpec("DP", ROLES))
    unsigned = empirical_metric(table, MetricSpec("DP", ROLES, signed=False))
    assert unsigned == abs(signed)
