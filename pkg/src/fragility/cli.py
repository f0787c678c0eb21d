"""Command-line front door: validate, project, bound, sweep, oracle, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .data import ObservedTable
from .events import EventError
from .graph import GraphError
from .metrics import METRIC_NAMES, RATE_NAMES, MetricError, MetricSpec, empirical_metric
from .oracles import (
    DIST8_CELLS,
    Dist8,
    OracleError,
    ProxyTable,
    f_divergence,
    fair_projection,
    min_flip_budget,
    proxy_closed_form,
)
from .program import ConfigError, load_config
from .scheme import SchemeError
from .solver import SolverOptions, solve, sweep
from .store import StoreError, read_table, sweep_document, write_result
from fragility.program import build_program

USER_ERRORS = (
    ConfigError,
    EventError,
    GraphError,
    MetricError,
    OracleError,
    SchemeError,
    StoreError,
    ValueError,
)


def _fail(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")
    return 1


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _solver_options(args) -> SolverOptions:
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("FRAGILITY_THREADS", "1"))
    return SolverOptions(
        gap_tol=args.gap_tol,
        max_nodes=args.max_nodes,
        time_budget=args.time_budget,
        seed=args.seed,
        threads=threads,
    )


def _add_solver_flags(cmd):
    cmd.add_argument("--gap-tol", type=float, default=1e-3, dest="gap_tol")
    cmd.add_argument("--max-nodes", type=int, default=200, dest="max_nodes")
    cmd.add_argument("--time-budget", type=float, default=None, dest="time_budget")
    cmd.add_argument("--seed", type=int, default=0)
    cmd.add_argument("--threads", type=int, default=None,
                     help="solver worker count (env FRAGILITY_THREADS)")


def _add_metric_flags(cmd):
    cmd.add_argument("--metric", required=True,
                     help=f"one of {', '.join(METRIC_NAMES + RATE_NAMES)}")
    cmd.add_argument("--policy", default="T",
                     help="policy node for counterfactual metrics")
    cmd.add_argument("--group", type=int, default=0,
                     help="group for the FPR/FNR/PPV rate statistics")


def _deltas(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad delta list {text!r}") from exc
    if not values:
        raise ConfigError("empty delta list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fragility",
        description="Certified sensitivity bounds for fairness parity metrics",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", help="check a bias config and print scheme dims")
    validate.add_argument("config")

    project = sub.add_parser("project", help="print the latent-projected edgelist")
    project.add_argument("config")

    bound = sub.add_parser("bound", help="certified bounds at a single budget")
    bound.add_argument("config")
    bound.add_argument("table")
    bound.add_argument("--delta", type=float, required=True)
    bound.add_argument("--sense", choices=["min", "max", "both"], default="both")
    _add_metric_flags(bound)
    _add_solver_flags(bound)

    sweep_cmd = sub.add_parser("sweep", help="bounds over a budget grid")
    sweep_cmd.add_argument("config")
    sweep_cmd.add_argument("table")
    sweep_cmd.add_argument("--deltas", required=True)
    sweep_cmd.add_argument("--second-config", dest="second_config", default=None)
    sweep_cmd.add_argument("--second-deltas", dest="second_deltas", default=None)
    sweep_cmd.add_argument("--sense", choices=["min", "max", "both"], default="both")
    sweep_cmd.add_argument("--out", default=None)
    _add_metric_flags(sweep_cmd)
    _add_solver_flags(sweep_cmd)

    oracle = sub.add_parser("oracle", help="closed-form cross-checks")
    oracle.add_argument("table")
    oracle.add_argument("--check", required=True,
                        choices=["fogliato", "fair-projection", "flip-budget"])
    oracle.add_argument("--alpha", type=float, default=0.05)
    oracle.add_argument("--regime", choices=["C1", "C2"], default="C1")
    oracle.add_argument("--criterion", choices=["DP", "PVP", "EO"], default="DP")
    oracle.add_argument("--kind", choices=["chi2", "tv"], default="chi2")
    oracle.add_argument("--threshold", type=float, default=0.05)
    oracle.add_argument("--seed", type=int, default=0)

    serve = sub.add_parser("serve", help="start the local HTTP service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--workers", type=int, default=2,
                       help="concurrent analysis jobs")
    return parser


def _cmd_validate(args) -> int:
    config = load_config(_read(args.config))
    scheme = config.scheme()
    print(json.dumps({"valid": True, "scheme": scheme.describe()}, indent=2))
    return 0


def _cmd_project(args) -> int:
    config = load_config(_read(args.config))
    projected = config.projected()
    print(projected.serialize())
    return 0


def _table_to_dist8(table: ObservedTable) -> Dist8:
    freq = table.frequencies()
    return Dist8([float(freq[(a, y, p)]) for (a, p, y) in DIST8_CELLS])


def _group_slice(table: ObservedTable, group: int):
    freq = table.frequencies()
    mass = sum(float(f) for (a, _, _), f in freq.items() if a == group)
    if mass <= 0:
        raise OracleError(f"group {group} is empty")
    return {
        (y, p): float(freq[(group, y, p)]) / mass for y in (0, 1) for p in (0, 1)
    }


def _cmd_oracle(args) -> int:
    table = read_table(_read(args.table))
    if args.check == "fogliato":
        out = {"alpha": args.alpha, "regime": args.regime, "groups": {}}
        for group in (0, 1):
            cells = _group_slice(table, group)
            pt = ProxyTable(cells[(0, 0)], cells[(0, 1)], cells[(1, 0)], cells[(1, 1)],
                            args.alpha)
            metrics = ("FNR", "FPR", "PPV") if args.regime == "C1" else ("FNR", "FPR")
            out["groups"][str(group)] = {
                m: list(proxy_closed_form(pt, m, args.regime)) for m in metrics
            }
        print(json.dumps(out, indent=2))
        return 0
    if args.check == "fair-projection":
        p = _table_to_dist8(table).smoothed()
        out = {}
        for criterion in ("DP", "PVP", "EO"):
            q = fair_projection(p, criterion)
            out[criterion] = {
                "projection": list(q.p),
                "chi2": f_divergence(p, q, "chi2"),
                "tv": f_divergence(p, q, "tv"),
            }
        print(json.dumps(out, indent=2))
        return 0
    p = _table_to_dist8(table).smoothed()

    def statistic(q):
        qd = Dist8(q / q.sum() if abs(q.sum() - 1) > 1e-12 else q).smoothed()
        return f_divergence(qd, fair_projection(qd, args.criterion), args.kind)

    budget = min_flip_budget(p.p, statistic, args.threshold, seed=args.seed)
    print(json.dumps({
        "criterion": args.criterion, "kind": args.kind,
        "threshold": args.threshold, "statistic_now": statistic(p.p),
        "min_budget": budget,
    }, indent=2))
    return 0


def _metric_argument(args):
    return args.metric


def _cmd_bound(args) -> int:
    config = load_config(_read(args.config))
    table = read_table(_read(args.table))
    program = build_program(
        config, table, args.metric, args.delta, sense=args.sense,
        policy=args.policy, group=args.group,
    )
    result = solve(program, _solver_options(args))
    payload = result.to_dict()
    payload["delta"] = args.delta
    payload["metric"] = args.metric
    try:
        spec = MetricSpec(args.metric, config.roles(), group=args.group)
        if spec.is_observational:
            payload["empirical"] = empirical_metric(table, spec)
    except MetricError:
        pass
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(_read(args.config))
    table = read_table(_read(args.table))
    second = None
    second_deltas = None
    if args.second_config:
        second = load_config(_read(args.second_config))
        if not args.second_deltas:
            return _fail("config", "--second-config requires --second-deltas")
        second_deltas = _deltas(args.second_deltas)
    options = _solver_options(args)
    result = sweep(
        config, table, args.metric, _deltas(args.deltas), options,
        second=second, second_deltas=second_deltas,
        policy=args.policy, sense=args.sense, group=args.group,
    )
    document = sweep_document(config, table, result, options, seed=args.seed,
                              second_config=second)
    text = write_result(document)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(workers=args.workers)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": _cmd_validate,
        "project": _cmd_project,
        "bound": _cmd_bound,
        "sweep": _cmd_sweep,
        "oracle": _cmd_oracle,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except FileNotFoundError as exc:
        return _fail("io", str(exc))
    except USER_ERRORS as exc:
        return _fail(type(exc).__name__.removesuffix("Error").lower() or "error", str(exc))


if __name__ == "__main__":
    sys.exit(main())
