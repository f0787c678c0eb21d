"""Local HTTP JSON service driving analyses as background jobs.

The web workspace polls these endpoints; every number it renders originates
from a ResultDocument produced here, byte-identical to the CLI output for
the same inputs and seed.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid

from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .metrics import METRIC_NAMES, PAIR_METRICS, RATE_NAMES, MetricError, MetricSpec, empirical_metric
from .program import ConfigError, load_config
from .solver import SolverOptions, sweep
from .store import StoreError, read_table, sweep_document, table_hash, write_result

JOB_QUEUED = "queued"
JOB_RUNNING = "running"
JOB_DONE = "done"
JOB_FAILED = "failed"
JOB_CANCELLED = "cancelled"


class AnalysisRequest(BaseModel):
    config: dict
    table_id: str
    metric: str
    deltas: list[float]
    second_config: dict | None = None
    second_deltas: list[float] | None = None
    policy: str = "T"
    group: int = 0
    sense: str = "both"
    seed: int = 0
    options: dict = {}
    idempotency_key: str | None = None


class TableUpload(BaseModel):
    csv: str


class ConfigBody(BaseModel):
    config: dict


class _Job:
    def __init__(self, request: AnalysisRequest):
        self.id = uuid.uuid4().hex[:12]
        self.request = request
        self.status = JOB_QUEUED
        self.partial: list[dict] = []
        self.document: str | None = None
        self.error: str | None = None
        self.cancel = threading.Event()
        self.created = time.time()
        self.finished: float | None = None
        self.lock = threading.Lock()


def _solver_options(raw: dict) -> SolverOptions:
    allowed = {"gap_tol", "max_nodes", "time_budget", "relax_rounds", "restarts", "threads"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown solver options: {sorted(unknown)}")
    defaults = {"max_nodes": 200}
    defaults.update(raw)
    return SolverOptions(seed=0, **defaults)


def create_app(workers: int = 2, results_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="fragility", version="0.1.0")
    tables: dict[str, object] = {}
    jobs: dict[str, _Job] = {}
    idempotency: dict[str, str] = {}
    state_lock = threading.Lock()
    work: "queue.Queue[_Job]" = queue.Queue()

    def worker_loop():
        while True:
            job = work.get()
            if job is None:
                return
            _run_job(job)

    def _run_job(job: _Job):
        with job.lock:
            if job.cancel.is_set():
                job.status = JOB_CANCELLED
                return
            job.status = JOB_RUNNING
        req = job.request
        try:
            config = load_config(json.dumps(req.config))
            second = (
                load_config(json.dumps(req.second_config))
                if req.second_config is not None
                else None
            )
            table = tables[req.table_id]
            options = _solver_options(req.options)
            options = SolverOptions(
                gap_tol=options.gap_tol, max_nodes=options.max_nodes,
                time_budget=options.time_budget, relax_rounds=options.relax_rounds,
                restarts=options.restarts, threads=options.threads, seed=req.seed,
            )

            def on_result(delta, res):
                entry = {"delta": list(delta) if isinstance(delta, tuple) else delta}
                entry.update(res.to_dict())
                with job.lock:
                    job.partial.append(entry)

            result = sweep(
                config, table, req.metric, req.deltas, options,
                second=second,
                second_deltas=req.second_deltas,
                policy=req.policy, sense=req.sense, group=req.group,
                should_stop=job.cancel.is_set,
                on_result=on_result,
            )
            document = sweep_document(config, table, result, options,
                                      seed=req.seed, second_config=second)
            text = write_result(document)
            with job.lock:
                job.document = text
                job.status = JOB_CANCELLED if job.cancel.is_set() else JOB_DONE
                job.finished = time.time()
            if results_dir and job.status == JOB_DONE:
                import os

                os.makedirs(results_dir, exist_ok=True)
                with open(f"{results_dir}/{job.id}.json", "w", encoding="utf-8") as fh:
                    fh.write(text + "\n")
        except Exception as exc:
            with job.lock:
                job.status = JOB_FAILED
                job.error = f"{type(exc).__name__}: {exc}"
                job.finished = time.time()

    threads = [
        threading.Thread(target=worker_loop, daemon=True, name=f"fragility-worker-{i}")
        for i in range(max(1, workers))
    ]
    for thread in threads:
        thread.start()

    # -- endpoints -----------------------------------------------------------

    @app.post("/configs/validate")
    def validate_config(body: ConfigBody):
        try:
            config = load_config(json.dumps(body.config))
            scheme = config.scheme()
        except Exception as exc:
            return {"valid": False, "errors": [str(exc)]}
        return {
            "valid": True,
            "scheme_dims": scheme.describe(),
            "projected_edgelist": config.projected().serialize(),
        }

    @app.post("/tables")
    def upload_table(body: TableUpload):
        try:
            table = read_table(body.csv)
        except StoreError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        table_id = table_hash(table)[:12]
        with state_lock:
            tables[table_id] = table
        freq = {"-".join(map(str, cell)): float(f) for cell, f in table.frequencies().items()}
        empirical = {}
        from .graph import NodeRoleMap

        roles = NodeRoleMap(attribute="A", outcome="Y", prediction="P")
        for name in ("DP", "FPRP", "FNRP", "PPP", "NPP", "EO"):
            try:
                empirical[name] = empirical_metric(table, MetricSpec(name, roles))
            except MetricError as exc:
                empirical[name] = None
        return {
            "table_id": table_id,
            "total": table.total,
            "frequencies": freq,
            "empirical": empirical,
        }

    @app.get("/metrics")
    def metric_catalog():
        catalog = []
        for name in METRIC_NAMES + RATE_NAMES:
            catalog.append({
                "name": name,
                "requires_policy": name.startswith("CF_"),
                "pair": name in PAIR_METRICS,
                "observational": name in ("DP", "FPRP", "FNRP", "PPP", "NPP", "EO") + RATE_NAMES,
                "takes_group": name in RATE_NAMES,
            })
        return {"metrics": catalog}

    @app.post("/analyses", status_code=202)
    def submit(req: AnalysisRequest):
        try:
            load_config(json.dumps(req.config))
            if req.second_config is not None:
                load_config(json.dumps(req.second_config))
            if req.metric not in METRIC_NAMES + RATE_NAMES:
                raise MetricError(f"unknown metric {req.metric!r}")
            _solver_options(req.options)
        except Exception as exc:
            return JSONResponse(
                status_code=400,
                content={"error": {"field": "config", "message": str(exc)}},
            )
        with state_lock:
            if req.table_id not in tables:
                return JSONResponse(
                    status_code=400,
                    content={"error": {"field": "table_id", "message": "unknown table"}},
                )
            if req.idempotency_key is not None:
                existing = idempotency.get(req.idempotency_key)
                if existing is not None:
                    return JSONResponse(
                        status_code=409,
                        content={"error": {"message": "duplicate submission"},
                                 "analysis_id": existing},
                    )
            job = _Job(req)
            jobs[job.id] = job
            if req.idempotency_key is not None:
                idempotency[req.idempotency_key] = job.id
        work.put(job)
        return {"analysis_id": job.id}

    @app.get("/analyses/{analysis_id}")
    def status(analysis_id: str):
        job = jobs.get(analysis_id)
        if job is None:
            return JSONResponse(status_code=404, content={"error": "unknown analysis"})
        with job.lock:
            payload = {
                "analysis_id": job.id,
                "status": job.status,
                "partial": list(job.partial),
                "error": job.error,
            }
            if job.document is not None:
                payload["document"] = json.loads(job.document)
        return payload

    @app.delete("/analyses/{analysis_id}")
    def cancel(analysis_id: str):
        job = jobs.get(analysis_id)
        if job is None:
            return JSONResponse(status_code=404, content={"error": "unknown analysis"})
        job.cancel.set()
        with job.lock:
            if job.status == JOB_QUEUED:
                job.status = JOB_CANCELLED
            return {"analysis_id": job.id, "status": job.status,
                    "partial": list(job.partial)}

    @app.get("/health")
    def health():
        return {"status": "ok", "jobs": len(jobs)}

    app.state.shutdown = lambda: [work.put(None) for _ in threads]
    return app
