"""HTTP surface for analysts and the query-builder frontend.

Endpoints:
    GET    /api/concepts                 concept hierarchy + filter/select metadata
    POST   /api/queries                  submit a query document -> {executionId}
    GET    /api/queries                  the caller's history (owner header)
    GET    /api/queries/{id}             {state, lineCount?, error?}
    GET    /api/queries/{id}/result.csv  CSV bytes once DONE (409 while RUNNING,
                                         410 for failed/expired results)
    PATCH  /api/queries/{id}             rename a history entry
    DELETE /api/queries/{id}

History and DONE results are persisted under the data directory (append-only
record log plus one lines/csv file pair per execution) and survive restarts.
"""

from __future__ import annotations

import asyncio
import glob
import json
import logging
import os
import time

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .cluster.local import LocalCluster
from .config import ServiceConfig
from .csvout import render_csv
from .dateset import DateSet
from .engine.evaluate import ResultLine
from .errors import ValidationError
from .querymodel import parse_query, result_header
from .registry import DatasetRegistry, load_registry

log = logging.getLogger("cohortq.api")


class StoredExecution:
    def __init__(self, execution_id: str, owner: str, doc: dict, name: str, created_at: float):
        self.id = execution_id
        self.owner = owner
        self.doc = doc
        self.name = name
        self.created_at = created_at
        self.state = "RUNNING"
        self.error: str | None = None
        self.line_count: int | None = None

    def record(self) -> dict:
        return {
            "id": self.id,
            "owner": self.owner,
            "doc": self.doc,
            "name": self.name,
            "createdAt": self.created_at,
            "state": self.state,
            "error": self.error,
            "lineCount": self.line_count,
        }

    def status_body(self) -> dict:
        body = {"executionId": self.id, "state": self.state}
        if self.line_count is not None:
            body["lineCount"] = self.line_count
        if self.error is not None:
            body["error"] = self.error
        return body

    def history_entry(self) -> dict:
        return {
            "executionId": self.id,
            "name": self.name,
            "state": self.state,
            "createdAt": self.created_at,
            "lineCount": self.line_count,
            "error": self.error,
        }


class QueryService:
    """Persistence plus the bridge between HTTP handlers and the cluster."""

    def __init__(self, registry: DatasetRegistry, config: ServiceConfig):
        self.registry = registry
        self.config = config
        self.cluster: LocalCluster | None = None
        self.executions: dict[str, StoredExecution] = {}
        os.makedirs(self.results_dir, exist_ok=True)
        self._replay_log()
        self._purge_expired()

    # -- persistence --------------------------------------------------------

    @property
    def log_path(self) -> str:
        return os.path.join(self.config.data_dir, "executions.jsonl")

    @property
    def results_dir(self) -> str:
        return os.path.join(self.config.data_dir, "results")

    def _lines_path(self, execution_id: str) -> str:
        return os.path.join(self.results_dir, f"{execution_id}.lines.jsonl")

    def _csv_path(self, execution_id: str) -> str:
        return os.path.join(self.results_dir, f"{execution_id}.csv")

    def _append(self, record: dict):
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")

    def _replay_log(self):
        if not os.path.exists(self.log_path):
            return
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                ex = self.executions.get(rec["id"])
                if ex is None:
                    ex = StoredExecution(
                        rec["id"], rec["owner"], rec["doc"], rec["name"], rec["createdAt"]
                    )
                    self.executions[ex.id] = ex
                ex.state = rec["state"]
                ex.error = rec.get("error")
                ex.line_count = rec.get("lineCount")
                ex.name = rec.get("name", ex.name)
        # queries in flight when the process died cannot complete anymore
        for ex in self.executions.values():
            if ex.state in ("CREATED", "RUNNING"):
                ex.state = "FAILED"
                ex.error = "interrupted by service restart"
                self._append(ex.record())

    def _purge_expired(self):
        if self.config.retention_days is None:
            return
        cutoff = time.time() - self.config.retention_days * 86400
        for path in glob.glob(os.path.join(self.results_dir, "*")):
            if os.path.getmtime(path) < cutoff:
                os.unlink(path)

    # -- cluster ------------------------------------------------------------

    async def start_cluster(self):
        self.cluster = LocalCluster(
            self.registry,
            n_workers=max(1, self.config.workers),
            bucket_count=self.config.bucket_count,
            pool_size=self.config.pool_size,
            heartbeat_interval=self.config.heartbeat_interval,
            heartbeat_miss_limit=self.config.heartbeat_miss_limit,
        )
        await self.cluster.start()
        if self.config.import_dir:
            for path in sorted(glob.glob(os.path.join(self.config.import_dir, "*.cqimport"))):
                with open(path, "rb") as fh:
                    await self.cluster.load_import(fh.read())
                log.info("loaded %s", path)

    async def stop_cluster(self):
        if self.cluster:
            await self.cluster.stop()

    # -- operations -----------------------------------------------------------

    def validate(self, doc: dict):
        ast = parse_query(doc, self.registry)
        violations = []
        for saved in ast.saved_queries():
            ref = self.executions.get(saved.execution_id)
            if ref is None:
                violations.append(f"saved query {saved.execution_id!r} does not exist")
            elif ref.state != "DONE":
                violations.append(
                    f"saved query {saved.execution_id!r} is {ref.state}, not DONE"
                )
        if violations:
            raise ValidationError(violations)
        return ast

    def _membership_for(self, execution_id: str) -> dict:
        table: dict[str, DateSet] = {}
        with open(self._lines_path(execution_id), "r", encoding="utf-8") as fh:
            for raw in fh:
                if not raw.strip():
                    continue
                line = ResultLine.from_document(json.loads(raw))
                ds = table.get(line.entity, DateSet())
                table[line.entity] = ds.union(line.dates)
        return {e: ds.to_document() for e, ds in table.items()}

    async def submit(self, doc: dict, owner: str) -> StoredExecution:
        ast = self.validate(doc)
        memberships = {
            s.execution_id: self._membership_for(s.execution_id) for s in ast.saved_queries()
        }
        execution = await self.cluster.manager.submit(doc, memberships)
        stored = StoredExecution(
            execution.id,
            owner,
            doc,
            name=f"Query {time.strftime('%Y-%m-%d %H:%M:%S')}",
            created_at=time.time(),
        )
        stored.state = execution.state
        stored.error = execution.error
        self.executions[stored.id] = stored
        self._append(stored.record())
        if execution.state == "RUNNING":
            asyncio.ensure_future(self._watch(stored, ast))
        return stored

    async def _watch(self, stored: StoredExecution, ast):
        execution = await self.cluster.manager.wait(stored.id)
        if execution.state == "DONE":
            header = result_header(ast)
            with open(self._lines_path(stored.id), "w", encoding="utf-8") as fh:
                for line in execution.lines:
                    fh.write(json.dumps(line.to_document(), separators=(",", ":")) + "\n")
            csv_bytes = render_csv(header, execution.lines, self.config.csv_separator)
            with open(self._csv_path(stored.id), "wb") as fh:
                fh.write(csv_bytes)
            stored.line_count = len(execution.lines)
        stored.state = execution.state
        stored.error = execution.error
        self._append(stored.record())

    def delete(self, execution_id: str):
        self.executions.pop(execution_id, None)
        for path in (self._lines_path(execution_id), self._csv_path(execution_id)):
            if os.path.exists(path):
                os.unlink(path)
        self._append({"id": execution_id, "deleted": True})

    def rename(self, stored: StoredExecution, name: str):
        stored.name = name
        self._append(stored.record())


def create_app(service: QueryService) -> FastAPI:
    async def lifespan(app):
        await service.start_cluster()
        yield
        await service.stop_cluster()

    app = FastAPI(title="cohortq", lifespan=lifespan)
    owner_header = service.config.owner_header

    def owner_of(request: Request) -> str:
        return request.headers.get(owner_header, "anonymous")

    @app.get("/api/concepts")
    async def concepts():
        return service.registry.to_frontend_document()

    @app.post("/api/queries")
    async def submit(request: Request):
        try:
            doc = await request.json()
        except json.JSONDecodeError:
            return JSONResponse({"violations": ["request body is not JSON"]}, status_code=400)
        try:
            stored = await service.submit(doc, owner_of(request))
        except ValidationError as exc:
            return JSONResponse({"violations": exc.violations}, status_code=400)
        return {"executionId": stored.id}

    @app.get("/api/queries")
    async def history(request: Request):
        owner = owner_of(request)
        entries = [
            e.history_entry()
            for e in sorted(
                service.executions.values(), key=lambda e: e.created_at, reverse=True
            )
            if e.owner == owner
        ]
        return entries

    @app.get("/api/queries/{execution_id}")
    async def status(execution_id: str):
        stored = service.executions.get(execution_id)
        if stored is None:
            return JSONResponse({"error": "unknown execution"}, status_code=404)
        return stored.status_body()

    @app.get("/api/queries/{execution_id}/result.csv")
    async def result_csv(execution_id: str):
        stored = service.executions.get(execution_id)
        if stored is None:
            return JSONResponse({"error": "unknown execution"}, status_code=404)
        if stored.state == "RUNNING":
            return JSONResponse({"error": "query still running"}, status_code=409)
        if stored.state != "DONE":
            return JSONResponse(
                {"error": stored.error or f"query {stored.state}"}, status_code=410
            )
        path = service._csv_path(execution_id)
        if not os.path.exists(path):
            return JSONResponse({"error": "result expired"}, status_code=410)
        with open(path, "rb") as fh:
            return Response(fh.read(), media_type="text/csv; charset=utf-8")

    @app.patch("/api/queries/{execution_id}")
    async def rename(execution_id: str, request: Request):
        stored = service.executions.get(execution_id)
        if stored is None:
            return JSONResponse({"error": "unknown execution"}, status_code=404)
        body = await request.json()
        name = body.get("name")
        if not isinstance(name, str) or not name:
            return JSONResponse({"violations": ["name must be a nonempty string"]}, 400)
        service.rename(stored, name)
        return stored.history_entry()

    @app.delete("/api/queries/{execution_id}")
    async def delete(execution_id: str):
        if execution_id not in service.executions:
            return JSONResponse({"error": "unknown execution"}, status_code=404)
        service.delete(execution_id)
        return {"deleted": execution_id}

    if service.config.frontend_dir and os.path.isdir(service.config.frontend_dir):
        app.mount(
            "/", StaticFiles(directory=service.config.frontend_dir, html=True), name="ui"
        )
    return app


def build_service(config: ServiceConfig) -> QueryService:
    registry = load_registry(config.dataset_config)
    return QueryService(registry, config)
