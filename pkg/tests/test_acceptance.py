"""Acceptance criteria, one test per criterion, each printing PASS/FAIL.

Solver-facing criteria run through the CLI (bound/sweep/oracle subcommands);
compiler- and oracle-level criteria exercise the library surface directly.
Budgets are sized for a laptop-class run of the whole module.
"""

import itertools
import json
import math

import numpy as np
import pytest

from fragility.cli import main
from fragility.configs import builtin_config, builtin_config_text
from fragility.data import ObservedTable
from fragility.events import Atom, PolynomialExpr, compile_event_poly
from fragility.graph import NodeRoleMap, latent_project, parse_edgelist
from fragility.metrics import MetricSpec, empirical_metric
from fragility.oracles import (
    DIST8_CELLS,
    Dist8,
    ProxyTable,
    brute_force_envelope,
    f_divergence,
    fair_projection,
    min_flip_budget,
    proxy_closed_form,
    sample_ecp_models,
    sample_proxy_models,
    sample_selection_models,
    shift_basis,
)
from fragility.program import build_program
from fragility.scheme import build_scheme, realize, response_function_count
from fragility.solver import SolverOptions, solve, sweep
from fragility.store import read_result, read_table

FOGLIATO_CSV = "A,Y,Yhat,count\n" + "\n".join(
    f"{a},{y},{p},{c}"
    for a in (0, 1)
    for (y, p), c in [((0, 0), 400), ((0, 1), 300), ((1, 0), 100), ((1, 1), 200)]
)

SYNTH_CSV = """A,Y,Yhat,count
0,0,0,300
0,0,1,150
0,1,0,100
0,1,1,200
1,0,0,250
1,0,1,150
1,1,0,150
1,1,1,200
"""

SYNTH_TABLE = read_table(SYNTH_CSV)
TOL = 2e-3


def _report(name: str, ok: bool, detail: str = ""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    tmp_path = tmp_path_factory.mktemp("acceptance")
    paths = {}
    for name in ("fogliato_fnr", "fogliato_fpr", "proxy", "selection", "ecp"):
        p = tmp_path / f"{name}.json"
        p.write_text(builtin_config_text(name))
        paths[name] = str(p)
    fog = tmp_path / "fogliato.csv"
    fog.write_text(FOGLIATO_CSV + "\n")
    paths["fogliato_csv"] = str(fog)
    synth = tmp_path / "synth.csv"
    synth.write_text(SYNTH_CSV)
    paths["synth_csv"] = str(synth)
    paths["tmp"] = tmp_path
    return paths


def _run_cli_json(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return json.loads(captured.out)


# -- 1. Oracle equivalence ----------------------------------------------------


def test_oracle_equivalence_fogliato(workdir, capsys):
    """Solver bounds recover the algebraically derived proxy-bias bounds."""
    alphas = [0.0, 0.01, 0.02, 0.05, 0.1]
    slice_ = ProxyTable(0.4, 0.3, 0.1, 0.2, 0.0)
    worst = 0.0
    for metric, budget in (("FNR", 400), ("FPR", 160), ("PPV", 160)):
        out = workdir["tmp"] / f"oracle_eq_{metric}.json"
        argv = [
            "sweep", workdir["fogliato_fnr"], workdir["fogliato_csv"],
            "--metric", metric, "--group", "0",
            "--deltas", ",".join(str(a) for a in alphas),
            "--max-nodes", str(budget), "--out", str(out),
        ]
        code = main(argv)
        capsys.readouterr()
        assert code == 0
        doc = read_result(out.read_text())
        for alpha, row in zip(alphas, doc.results):
            ref = proxy_closed_form(
                ProxyTable(0.4, 0.3, 0.1, 0.2, alpha), metric
            )
            worst = max(worst, abs(row["lower"] - ref[0]), abs(row["upper"] - ref[1]))
            assert row["lower"] <= ref[0] + TOL and row["upper"] >= ref[1] - TOL
            assert abs(row["lower"] - ref[0]) <= TOL, (metric, alpha, row, ref)
            assert abs(row["upper"] - ref[1]) <= TOL, (metric, alpha, row, ref)
    _report("oracle equivalence (FNR/FPR/PPV vs closed form)", True,
            f"max deviation {worst:.2e}")


# -- 2. Identification invariance ----------------------------------------------


def test_identification_invariance(workdir, capsys):
    """FNR (and FPR under the mirror regime) stays a line for any budget."""
    widths = []
    for config, metric in (("fogliato_fnr", "FNR"), ("fogliato_fpr", "FPR")):
        out = workdir["tmp"] / f"ident_{metric}.json"
        code = main([
            "sweep", workdir[config], workdir["fogliato_csv"],
            "--metric", metric, "--group", "0",
            "--deltas", "0.05,0.1,0.2",
            "--max-nodes", "900", "--gap-tol", "7e-4", "--out", str(out),
        ])
        capsys.readouterr()
        assert code == 0
        doc = read_result(out.read_text())
        for row in doc.results:
            widths.append(row["upper"] - row["lower"])
    ok = all(w <= TOL for w in widths)
    _report("identification invariance (Props C.1/C.2)", ok,
            f"max width {max(widths):.2e}")


# -- 3. Budget-zero collapse -----------------------------------------------------


def test_budget_zero_collapse(workdir, capsys):
    roles = NodeRoleMap(attribute="A", outcome="Y", prediction="P")
    metrics = ("DP", "FPRP", "FNRP", "PPP", "NPP", "EO")
    worst = 0.0
    for config in ("proxy", "selection", "ecp"):
        for metric in metrics:
            payload = _run_cli_json(capsys, [
                "bound", workdir[config], workdir["synth_csv"],
                "--metric", metric, "--delta", "0", "--max-nodes", "60",
            ])
            emp = empirical_metric(SYNTH_TABLE, MetricSpec(metric, roles))
            width = payload["upper"] - payload["lower"]
            worst = max(worst, width)
            assert width <= TOL, (config, metric, payload)
            assert payload["lower"] - 1e-6 <= emp <= payload["upper"] + 1e-6, (
                config, metric, emp, payload,
            )
    _report("budget-zero collapse on the three bias configs", True,
            f"max interval width {worst:.2e}")


# -- 4. Soundness sandwich -------------------------------------------------------


def test_soundness_sandwich(workdir, capsys):
    cases = [
        ("proxy", "PPP", sample_proxy_models, None),
        ("selection", "FPRP", sample_selection_models, None),
        ("ecp", "CF_FPRP", sample_ecp_models, "T"),
    ]
    n_samples = 10_000
    for config_name, metric, sampler, policy in cases:
        config = builtin_config(config_name)
        roles = config.roles(policy=policy)
        spec = MetricSpec(metric, roles)
        for delta in (0.02, 0.05):
            program = build_program(config, SYNTH_TABLE, metric, delta, policy=policy)
            res = solve(program, SolverOptions(max_nodes=120))
            values = sampler(SYNTH_TABLE, delta, spec, n_samples, seed=13)
            values = values[~np.isnan(values)]
            assert len(values) == n_samples
            inside = np.all(values >= res.lower - 1e-9) and np.all(
                values <= res.upper + 1e-9
            )
            assert inside, (config_name, metric, delta, values.min(), values.max(),
                            res.lower, res.upper)
            best_hi = max(values.max(), res.incumbent_hi)
            best_lo = min(values.min(), res.incumbent_lo)
            assert res.upper - best_hi <= res.gap + 1e-9
            assert best_lo - res.lower <= res.gap + 1e-9
    _report("soundness sandwich (10^4 feasible models inside bounds)", True)


# -- 5. Monotone sweeps ----------------------------------------------------------


def test_monotone_sweeps(workdir, capsys):
    out = workdir["tmp"] / "ppp_sweep.json"
    code = main([
        "sweep", workdir["proxy"], workdir["synth_csv"],
        "--metric", "PPP", "--deltas", "0,0.01,0.03,0.05",
        "--max-nodes", "120", "--out", str(out),
    ])
    capsys.readouterr()
    assert code == 0
    doc = read_result(out.read_text())
    uppers = [r["upper"] for r in doc.results]
    lowers = [r["lower"] for r in doc.results]
    assert uppers == sorted(uppers)
    assert lowers == sorted(lowers, reverse=True)
    width_001 = uppers[1] - lowers[1]
    width_005 = uppers[3] - lowers[3]
    assert width_005 > width_001, (width_001, width_005)
    _report("monotone sweeps and strictly growing PPP width", True,
            f"width {width_001:.3f} -> {width_005:.3f}")


# -- 6. Two-bias grid --------------------------------------------------------------


def test_two_bias_grid(workdir, capsys):
    grid = "0,0.0167,0.0333,0.05"
    out = workdir["tmp"] / "two_bias.json"
    code = main([
        "sweep", workdir["proxy"], workdir["synth_csv"],
        "--metric", "FPRP", "--deltas", grid,
        "--second-config", workdir["selection"], "--second-deltas", grid,
        "--max-nodes", "12", "--out", str(out),
    ])
    capsys.readouterr()
    assert code == 0
    doc = read_result(out.read_text())
    assert len(doc.results) == 16
    rows = {tuple(d): r for d, r in zip(doc.deltas, doc.results)}
    assert all(r["status"] != "failed" for r in doc.results)
    corner = rows[(0.05, 0.05)]
    singles = [rows[(0.05, 0.0)], rows[(0.0, 0.05)]]
    ok = all(corner["upper"] >= s["upper"] - 1e-12 for s in singles)
    _report("two-bias 4x4 grid completes; compounding never shrinks", ok,
            f"corner upper {corner['upper']:.4f}")


# -- 7. Compiler correctness -------------------------------------------------------


def _fig3_schemes():
    proxy = parse_edgelist("A->Z, A->P, A->Y, Z->Y, U->Z, U->P, U->Y").with_hidden(["U"])
    selection = parse_edgelist("A->Y, A->P, A->S, U->P, U->Y, U->S, Y->S").with_hidden(["U"])
    ecp = parse_edgelist("A->T, A->Y, A->P, T->Y, U->P, U->Y, U->T").with_hidden(["U"])
    return [build_scheme(latent_project(d)) for d in (proxy, selection, ecp)]


def test_compiler_correctness():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for scheme in _fig3_schemes():
        nodes = sorted(scheme.dag.observed)
        pairs = 0
        for _ in range(100):
            atoms = []
            for _ in range(int(rng.integers(1, 4))):
                node = nodes[rng.integers(len(nodes))]
                do = ()
                if rng.random() < 0.4:
                    cand = [n for n in nodes if n != node]
                    do = ((cand[rng.integers(len(cand))], int(rng.integers(2))),)
                atoms.append(Atom(node, int(rng.integers(2)), do))
            poly = compile_event_poly(scheme, tuple(atoms))
            for _ in range(10):
                point = np.zeros(scheme.total_dim)
                for block in scheme.blocks:
                    point[block.offset : block.offset + block.dim] = rng.dirichlet(
                        np.ones(block.dim)
                    )
                direct = 0.0
                for combo in itertools.product(
                    *(scheme.block_assignments(i) for i in range(len(scheme.blocks)))
                ):
                    assignment = {}
                    weight = 1.0
                    for bi, fidxs in enumerate(combo):
                        block = scheme.blocks[bi]
                        fidx = dict(zip(block.nodes, fidxs))
                        assignment.update(fidx)
                        weight *= point[scheme.coord_index(bi, fidx)]
                    if weight and all(
                        realize(scheme, assignment, dict(a.do))[a.node] == a.value
                        for a in atoms
                    ):
                        direct += weight
                worst = max(worst, abs(poly.evaluate(point) - direct))
                pairs += 1
        assert pairs == 1000
    assert worst <= 1e-12
    # normalization-to-one symbolic checks
    for scheme in _fig3_schemes():
        nodes = sorted(scheme.dag.observed)
        total = PolynomialExpr()
        for values in itertools.product((0, 1), repeat=len(nodes)):
            total = total + compile_event_poly(
                scheme, tuple(Atom(n, v) for n, v in zip(nodes, values))
            )
        assert total.reduced(scheme) == PolynomialExpr.const(1)
    _report("compiler vs direct enumeration (1000 pairs per graph)", True,
            f"max deviation {worst:.2e}")


# -- 8. Counts and dimensions -------------------------------------------------------


def test_response_counts_and_dims():
    dag = parse_edgelist("A->Y, A->P, Y->P")
    assert response_function_count("A", dag) == 2
    assert response_function_count("Y", dag) == 4
    assert response_function_count("P", dag) == 16
    assert build_scheme(parse_edgelist("A->Y")).total_dim == 6
    no_dash = parse_edgelist("A->Z, A->P, A->Y, Z->Y, U->Z, U->P").with_hidden(["U"])
    assert build_scheme(latent_project(no_dash)).total_dim == 34
    _report("response-function counts (2, 4, 16) and dims (6, 34)", True)


# -- 9. Supplementary oracles -------------------------------------------------------


def test_supplementary_oracles():
    rng = np.random.default_rng(31)
    resid = 0.0
    for _ in range(20):
        p = Dist8(rng.dirichlet(np.ones(8)))
        for criterion in ("DP", "PVP", "EO"):
            q = fair_projection(p, criterion)
            for (a, yh, y) in DIST8_CELLS:
                if criterion == "DP":
                    r = q.marginal(a=a, yhat=yh) - q.marginal(a=a) * q.marginal(yhat=yh)
                elif criterion == "PVP":
                    r = q.cell(a, yh, y) * q.marginal(yhat=yh) - q.marginal(
                        yhat=yh, y=y
                    ) * q.marginal(a=a, yhat=yh)
                else:
                    r = q.cell(a, yh, y) * q.marginal(y=y) - q.marginal(
                        yhat=yh, y=y
                    ) * q.marginal(a=a, y=y)
                resid = max(resid, abs(r))
    assert resid < 1e-12

    assert f_divergence([0.5, 0.5], [0.25, 0.75], "chi2") == pytest.approx(1 / 3, abs=1e-9)
    assert f_divergence([0.5, 0.5], [0.25, 0.75], "tv") == pytest.approx(0.5, abs=1e-9)

    p2 = np.array([0.3, 0.7])
    stat = lambda q: float(q[0])
    xs = np.arange(0.0, 1.0 + 1e-9, 1e-3)
    grid_answer = min(
        abs(x - p2[0]) * math.sqrt(2.0) for x in xs if x >= 0.5
    )
    assert min_flip_budget(p2, stat, 0.5) == pytest.approx(grid_answer, abs=TOL)

    # conditional invariance of the attribute-shift direction where exact
    p = Dist8([0.15] * 4 + [0.10] * 4)
    from fragility.oracles import apply_shift

    q = apply_shift(p, [0.08, 0, 0, 0, 0, 0, 0])
    resid2 = 0.0
    for a in (0, 1):
        for yh in (0, 1):
            resid2 = max(
                resid2,
                abs(q.marginal(a=a, yhat=yh) / q.marginal(a=a) - 0.5),
            )
            for y in (0, 1):
                resid2 = max(
                    resid2,
                    abs(q.cell(a, yh, y) / q.marginal(a=a, yhat=yh) - 0.5),
                )
    assert resid2 < 1e-12
    _report("supplementary oracles (projections, divergences, flip budget, shifts)", True)


# -- 10. ECP monotonicity -------------------------------------------------------------


def test_ecp_monotonicity(workdir, capsys):
    config = builtin_config("ecp")
    program = build_program(config, SYNTH_TABLE, "CF_FPRP", 0.3, policy="T")
    # budget-only variant: drop data equalities so rejection sampling engages
    from fragility.program import SensitivityProgram

    budget_only = SensitivityProgram(
        scheme=program.scheme, metric=program.metric,
        objective_terms=program.objective_terms, sense="both",
        equalities=(), inequalities=program.inequalities,
        pinned=program.pinned, delta=program.delta,
        observed=program.observed, cond_nodes=program.cond_nodes,
    )
    from fragility.events import Atom, compile_event_poly
    from fragility.solver.fastpoly import FastPoly

    scheme = program.scheme
    ate_poly = compile_event_poly(scheme, (Atom("Y", 1, (("T", 1),)),)) - \
        compile_event_poly(scheme, (Atom("Y", 1, (("T", 0),)),))
    ate = FastPoly(ate_poly)
    rng = np.random.default_rng(77)
    pinned = set(program.pinned)
    min_ate = math.inf
    for _ in range(2000):
        x = np.zeros(scheme.total_dim)
        for block in scheme.blocks:
            idx = [i for i in range(block.offset, block.offset + block.dim)
                   if i not in pinned]
            x[idx] = rng.dirichlet(np.ones(len(idx)))
        min_ate = min(min_ate, ate(x))
    assert min_ate >= -1e-12, min_ate

    cf = solve(build_program(config, SYNTH_TABLE, "CF_FPRP", 0.0, policy="T"),
               SolverOptions(max_nodes=60))
    factual = solve(build_program(config, SYNTH_TABLE, "FPRP", 0.0),
                    SolverOptions(max_nodes=60))
    assert abs(cf.lower - factual.lower) <= TOL
    assert abs(cf.upper - factual.upper) <= TOL
    _report("ECP monotonicity (no defiers; CF collapses to factual at zero ATE)",
            True, f"min sampled ATE {min_ate:.2e}")
