"""Budget sweeps: one certified solve per delta, with monotone envelopes.

Feasible sets nest as budgets grow, so the reported upper curve may take a
running maximum (and the lower curve a running minimum) over smaller
budgets, and incumbent witnesses found at one budget warm-start the next.
Two-bias sweeps run a grid over (delta1, delta2) with the envelope taken
over the coordinatewise partial order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..program import build_program
from .bnb import BoundsResult, SolverOptions, solve

__all__ = ["SweepResult", "sweep"]


@dataclass
class SweepResult:
    metric: str
    deltas: list  # floats, or (d1, d2) pairs for two-bias grids
    results: list  # BoundsResult per delta (status 'failed' entries allowed)
    provenance: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for delta, res in zip(self.deltas, self.results):
            entry = {"delta": delta}
            entry.update(res.to_dict())
            out.append(entry)
        return out


def _envelope_1d(results: list[BoundsResult]) -> None:
    run_lo, run_hi = math.inf, -math.inf
    run_ilo, run_ihi = None, None
    for res in results:
        if res.status == "infeasible" or res.status == "failed":
            continue
        run_lo = min(run_lo, res.lower)
        run_hi = max(run_hi, res.upper)
        res.lower, res.upper = run_lo, run_hi
        if res.incumbent_lo is not None:
            run_ilo = res.incumbent_lo if run_ilo is None else min(run_ilo, res.incumbent_lo)
        if res.incumbent_hi is not None:
            run_ihi = res.incumbent_hi if run_ihi is None else max(run_ihi, res.incumbent_hi)
        res.incumbent_lo, res.incumbent_hi = run_ilo, run_ihi
        if run_ilo is not None and run_ihi is not None:
            res.gap = max(res.upper - run_ihi, run_ilo - res.lower)


def _envelope_grid(deltas, results) -> None:
    order = {d: i for i, d in enumerate(deltas)}
    for d in sorted(deltas):
        res = results[order[d]]
        if res.status in ("infeasible", "failed"):
            continue
        for other in deltas:
            if other == d:
                continue
            if other[0] <= d[0] and other[1] <= d[1]:
                prev = results[order[other]]
                if prev.status in ("infeasible", "failed"):
                    continue
                res.lower = min(res.lower, prev.lower)
                res.upper = max(res.upper, prev.upper)
                if prev.incumbent_lo is not None:
                    res.incumbent_lo = (
                        prev.incumbent_lo
                        if res.incumbent_lo is None
                        else min(res.incumbent_lo, prev.incumbent_lo)
                    )
                if prev.incumbent_hi is not None:
                    res.incumbent_hi = (
                        prev.incumbent_hi
                        if res.incumbent_hi is None
                        else max(res.incumbent_hi, prev.incumbent_hi)
                    )
        if res.incumbent_lo is not None and res.incumbent_hi is not None:
            res.gap = max(res.upper - res.incumbent_hi, res.incumbent_lo - res.lower)


def sweep(
    config,
    table,
    metric,
    deltas,
    options: SolverOptions | None = None,
    second=None,
    second_deltas=None,
    policy: str | None = None,
    sense: str = "both",
    group: int = 0,
    should_stop=None,
    on_result=None,
) -> SweepResult:
    """Solve the bounding problem over a budget grid.

    ``second``/``second_deltas`` switch to a two-bias grid over the merged
    structure. Per-delta failures are recorded, not fatal. ``on_result`` is
    called after each certified point (used for live progress reporting).
    """
    options = options or SolverOptions()
    if second is not None:
        if not second_deltas:
            raise ValueError("second config given without second deltas")
        grid = [(d1, d2) for d1 in sorted(deltas) for d2 in sorted(second_deltas)]
    else:
        grid = sorted(deltas)

    results: list[BoundsResult] = []
    hints: list = []
    for delta in grid:
        try:
            if second is not None:
                program = build_program(
                    config, table, metric, delta[0], sense=sense,
                    policy=policy, second=(second, delta[1]), group=group,
                )
            else:
                program = build_program(
                    config, table, metric, delta, sense=sense, policy=policy, group=group,
                )
            res = solve(program, options, hints=hints, should_stop=should_stop)
            hints = res.meta.get("points", hints)[-16:]
        except Exception as exc:  # per-delta failure is recorded, not fatal
            res = BoundsResult(
                -math.inf, math.inf, None, None, math.inf, 0, "failed",
                meta={"error": f"{type(exc).__name__}: {exc}"},
            )
        results.append(res)
        if on_result is not None:
            on_result(delta, res)
        if should_stop and should_stop():
            break
    while len(results) < len(grid):
        results.append(
            BoundsResult(-math.inf, math.inf, None, None, math.inf, 0, "failed",
                         meta={"error": "cancelled"})
        )

    if second is not None:
        _envelope_grid(grid, results)
    else:
        _envelope_1d(results)

    spec_name = metric if isinstance(metric, str) else metric.name
    return SweepResult(
        metric=spec_name,
        deltas=[list(d) if isinstance(d, tuple) else d for d in grid],
        results=results,
        provenance={
            "config_hash": config.config_hash(),
            "second_config_hash": second.config_hash() if second is not None else None,
            "options": {
                "gap_tol": options.gap_tol,
                "max_nodes": options.max_nodes,
                "relax_rounds": options.relax_rounds,
                "restarts": options.restarts,
                "seed": options.seed,
                "threads": options.threads,
            },
        },
    )
