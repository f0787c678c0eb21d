"""External formats: dataset CSV, result documents, canonical JSON."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from . import __version__
from .data import CELLS, ObservedTable, TableError
from .program import BiasConfig, load_config

__all__ = [
    "StoreError",
    "read_table",
    "table_hash",
    "canonical_dumps",
    "ResultDocument",
    "write_result",
    "read_result",
]

SCHEMA_VERSION = 1
CSV_HEADER = "A,Y,Yhat,count"


class StoreError(ValueError):
    """Raised for malformed external documents."""


# ---------------------------------------------------------------------------
# Dataset CSV
# ---------------------------------------------------------------------------


def read_table(text: str, conditioned_on: str | None = None) -> ObservedTable:
    """Parse a cell-count CSV with header ``A,Y,Yhat,count``.

    Missing cells count as zero; duplicate cell rows are rejected.
    """
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines or lines[0].replace(" ", "") != CSV_HEADER:
        raise StoreError(f"bad header; expected {CSV_HEADER!r}")
    counts: dict[tuple[int, int, int], int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise StoreError(f"line {lineno}: expected 4 columns")
        try:
            a, y, p, count = (int(x) for x in parts)
        except ValueError as exc:
            raise StoreError(f"line {lineno}: non-integer value") from exc
        if (a, y, p) not in CELLS:
            raise StoreError(f"line {lineno}: cell ({a},{y},{p}) out of the binary domain")
        if count < 0:
            raise StoreError(f"line {lineno}: negative count")
        if (a, y, p) in counts:
            raise StoreError(f"line {lineno}: duplicate cell ({a},{y},{p})")
        counts[(a, y, p)] = count
    try:
        return ObservedTable.from_counts(counts, conditioned_on)
    except TableError as exc:
        raise StoreError(str(exc)) from exc


def write_table(table: ObservedTable) -> str:
    rows = [CSV_HEADER]
    rows += [f"{a},{y},{p},{count}" for (a, y, p), count in table.counts]
    return "\n".join(rows) + "\n"


def table_hash(table: ObservedTable) -> str:
    return hashlib.sha256(write_table(table).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Canonical JSON
# ---------------------------------------------------------------------------


def _canon(obj, out: list[str]) -> None:
    if obj is None or isinstance(obj, (bool, int, str)):
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        if not math.isfinite(obj):
            raise StoreError(f"non-finite float {obj!r} in document")
        if obj == int(obj) and abs(obj) < 1e16:
            out.append(f"{int(obj)}.0")
        else:
            out.append(format(obj, ".17g"))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise StoreError("document keys must be strings")
            if i:
                out.append(",")
            out.append(json.dumps(key))
            out.append(":")
            _canon(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _canon(item, out)
        out.append("]")
    else:
        raise StoreError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj) -> str:
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    out: list[str] = []
    _canon(obj, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# Result documents
# ---------------------------------------------------------------------------


@dataclass
class ResultDocument:
    """Self-contained record of a sweep; re-runnable from the document alone."""

    config: dict
    table_hash: str
    metric: str
    deltas: list
    results: list
    options: dict
    second_config: dict | None = None
    seed: int = 0
    engine_version: str = __version__
    schema_version: int = SCHEMA_VERSION
    timestamps: dict | None = None
    config_hash: str = ""

    def payload(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "engine_version": self.engine_version,
            "config": self.config,
            "second_config": self.second_config,
            "config_hash": self.config_hash,
            "table_hash": self.table_hash,
            "metric": self.metric,
            "deltas": self.deltas,
            "results": self.results,
            "options": self.options,
            "seed": self.seed,
            "timestamps": self.timestamps,
        }

    def document_hash(self) -> str:
        return hashlib.sha256(canonical_dumps(self.payload()).encode()).hexdigest()


def write_result(doc: ResultDocument) -> str:
    body = doc.payload()
    body["document_hash"] = doc.document_hash()
    return canonical_dumps(body)


def sweep_document(config, table, sweep_result, options, seed: int = 0,
                   second_config=None) -> ResultDocument:
    """Package a sweep into a self-contained, re-runnable document."""
    rows = []
    for delta, res in zip(sweep_result.deltas, sweep_result.results):
        entry = {"delta": delta}
        entry.update(res.to_dict())
        rows.append(entry)
    return ResultDocument(
        config=config.to_dict(),
        second_config=second_config.to_dict() if second_config is not None else None,
        config_hash=config.config_hash(),
        table_hash=table_hash(table),
        metric=sweep_result.metric,
        deltas=list(sweep_result.deltas),
        results=rows,
        options={
            "gap_tol": options.gap_tol,
            "max_nodes": options.max_nodes,
            "relax_rounds": options.relax_rounds,
            "restarts": options.restarts,
            "threads": options.threads,
            "eps_feas": 1e-6,
        },
        seed=seed,
    )


def read_result(text: str) -> ResultDocument:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreError(f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise StoreError("document must be a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise StoreError(
            f"schema version mismatch: {raw.get('schema_version')} != {SCHEMA_VERSION}"
        )
    expected = raw.pop("document_hash", None)
    doc = ResultDocument(
        config=raw["config"],
        second_config=raw.get("second_config"),
        config_hash=raw.get("config_hash", ""),
        table_hash=raw["table_hash"],
        metric=raw["metric"],
        deltas=raw["deltas"],
        results=raw["results"],
        options=raw["options"],
        seed=raw.get("seed", 0),
        engine_version=raw.get("engine_version", ""),
        schema_version=raw["schema_version"],
        timestamps=raw.get("timestamps"),
    )
    if expected is not None and doc.document_hash() != expected:
        raise StoreError("document hash verification failed")
    return doc
