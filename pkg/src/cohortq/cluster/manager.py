"""Manager node: worker registration, static bucket assignment, import
distribution, query broadcast and batched result collection.

Execution lifecycle: CREATED -> RUNNING -> DONE | FAILED | CANCELED. DONE
requires WORKER_DONE from every live worker; the first WORKER_FAILED (or a
worker death, which synthesizes one) fails the execution and broadcasts
CANCEL to the rest. Results of failed executions are discarded.
"""

from __future__ import annotations

import asyncio
import json
import logging
import struct
import time
import uuid

from ..engine.evaluate import ResultLine
from ..registry import DatasetRegistry
from .protocol import PROTOCOL_VERSION, read_message, write_message

log = logging.getLogger("cohortq.manager")

STATES = ("CREATED", "RUNNING", "DONE", "FAILED", "CANCELED")


class Execution:
    def __init__(self, execution_id: str, doc: dict, workers: list[str]):
        self.id = execution_id
        self.doc = doc
        self.state = "CREATED"
        self.lines: list[ResultLine] = []
        self.pending = set(workers)
        self.error: str | None = None
        self.created_at = time.time()
        self.finished_at: float | None = None
        self.done_event = asyncio.Event()

    def finish(self, state: str, error: str | None = None):
        if self.state in ("DONE", "FAILED", "CANCELED"):
            return
        self.state = state
        self.error = error
        self.finished_at = time.time()
        if state != "DONE":
            self.lines = []
        self.done_event.set()


class _WorkerHandle:
    def __init__(self, worker_id: str, writer: asyncio.StreamWriter):
        self.id = worker_id
        self.writer = writer
        self.bucket_ids: list[int] = []
        self.alive = True
        self.missed_pings = 0
        self.awaiting_pong = False
        self.send_lock = asyncio.Lock()

    async def send(self, doc: dict, binary: bytes = b""):
        async with self.send_lock:
            await write_message(self.writer, doc, binary)


def container_bucket_id(data: bytes) -> int:
    """Peek at a container's bucket id without fully loading it."""
    (header_len,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    return int(header["bucketId"])


class Manager:
    def __init__(
        self,
        registry: DatasetRegistry,
        bucket_count: int = 100,
        heartbeat_interval: float = 5.0,
        heartbeat_miss_limit: int = 3,
    ):
        self.registry = registry
        self.bucket_count = bucket_count
        self.heartbeat_interval = heartbeat_interval
        self.heartbeat_miss_limit = heartbeat_miss_limit
        self.workers: dict[str, _WorkerHandle] = {}
        self.executions: dict[str, Execution] = {}
        self.data_loaded = False
        self._server: asyncio.AbstractServer | None = None
        self._load_acks: dict[str, asyncio.Event] = {}
        self._heartbeat_task: asyncio.Task | None = None

    # -- lifecycle -----------------------------------------------------------

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> tuple[str, int]:
        self._server = await asyncio.start_server(self._handle_connection, host, port)
        addr = self._server.sockets[0].getsockname()
        self._heartbeat_task = asyncio.create_task(self._heartbeat_loop())
        log.info("manager listening on %s:%s", addr[0], addr[1])
        return addr[0], addr[1]

    async def stop(self):
        if self._heartbeat_task:
            self._heartbeat_task.cancel()
        for w in list(self.workers.values()):
            w.writer.close()
        if self._server:
            self._server.close()
            await self._server.wait_closed()

    # -- registration and assignment ------------------------------------------

    def _assign_all(self):
        """Round-robin every bucket id over the registered workers."""
        ids = sorted(self.workers)
        for w in self.workers.values():
            w.bucket_ids = []
        for b in range(self.bucket_count):
            self.workers[ids[b % len(ids)]].bucket_ids.append(b)

    async def _handle_connection(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        worker = None
        try:
            doc, _ = await read_message(reader)
            if doc.get("kind") != "REGISTER":
                await write_message(writer, {"kind": "REJECTED", "error": "expected REGISTER"})
                return
            if doc.get("v") != PROTOCOL_VERSION:
                await write_message(
                    writer,
                    {
                        "kind": "REJECTED",
                        "error": f"protocol version {doc.get('v')} unsupported",
                    },
                )
                return
            worker_id = doc.get("workerId") or f"worker-{uuid.uuid4().hex[:8]}"
            if worker_id in self.workers:
                await write_message(
                    writer, {"kind": "REJECTED", "error": f"duplicate workerId {worker_id!r}"}
                )
                return
            if self.data_loaded:
                await write_message(
                    writer,
                    {
                        "kind": "REJECTED",
                        "error": "static assignment: workers cannot join after data load",
                    },
                )
                return
            worker = _WorkerHandle(worker_id, writer)
            self.workers[worker_id] = worker
            self._assign_all()
            await worker.send(
                {
                    "kind": "REGISTERED",
                    "workerId": worker_id,
                    "dataset": self.registry.to_config_document(),
                    "bucketCount": self.bucket_count,
                }
            )
            for w in self.workers.values():
                await w.send({"kind": "ASSIGN_BUCKETS", "bucketIds": w.bucket_ids})
            log.info("worker %s registered (%d buckets)", worker_id, len(worker.bucket_ids))

            while True:
                doc, binary = await read_message(reader)
                await self._dispatch(worker, doc, binary)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            pass
        finally:
            if worker is not None:
                self._worker_lost(worker, "connection lost")
            writer.close()

    def _worker_lost(self, worker: _WorkerHandle, reason: str):
        if not worker.alive:
            return
        worker.alive = False
        self.workers.pop(worker.id, None)
        log.warning("worker %s lost: %s", worker.id, reason)
        for execution in self.executions.values():
            if execution.state == "RUNNING":
                self._fail_execution(execution, f"worker {worker.id} {reason}")

    # -- messages from workers -------------------------------------------------

    async def _dispatch(self, worker: _WorkerHandle, doc: dict, binary: bytes):
        kind = doc["kind"]
        if kind == "PONG":
            worker.missed_pings = 0
            worker.awaiting_pong = False
            return
        if kind == "LOAD_DONE":
            ev = self._load_acks.get(doc.get("ref", ""))
            if ev:
                ev.set()
            return
        execution = self.executions.get(doc.get("executionId", ""))
        if execution is None:
            log.warning("message %s for unknown execution %r ignored", kind, doc.get("executionId"))
            return
        if kind == "RESULT_BATCH":
            if execution.state != "RUNNING":
                log.warning("dropping late batch for %s (%s)", execution.id, execution.state)
                return
            execution.lines.extend(ResultLine.from_document(d) for d in doc["lines"])
        elif kind == "WORKER_DONE":
            if execution.state != "RUNNING":
                return
            execution.pending.discard(worker.id)
            if not execution.pending:
                execution.finish("DONE")
                log.info("execution %s done (%d lines)", execution.id, len(execution.lines))
        elif kind == "WORKER_FAILED":
            self._fail_execution(execution, doc.get("error", "worker failure"))

    def _fail_execution(self, execution: Execution, error: str):
        if execution.state != "RUNNING":
            return
        execution.finish("FAILED", error)
        log.warning("execution %s failed: %s", execution.id, error)
        for w in self.workers.values():
            asyncio.ensure_future(w.send({"kind": "CANCEL", "executionId": execution.id}))

    # -- heartbeat ---------------------------------------------------------------

    async def _heartbeat_loop(self):
        while True:
            await asyncio.sleep(self.heartbeat_interval)
            for w in list(self.workers.values()):
                if w.awaiting_pong:
                    w.missed_pings += 1
                    if w.missed_pings >= self.heartbeat_miss_limit:
                        w.writer.close()
                        self._worker_lost(w, "heartbeat timeout")
                        continue
                w.awaiting_pong = True
                try:
                    await w.send({"kind": "PING"})
                except (ConnectionResetError, BrokenPipeError):
                    self._worker_lost(w, "connection lost")

    # -- operator / api surface ----------------------------------------------------

    async def load_import(self, container: bytes, timeout: float = 120.0):
        """Route a preprocessed container to the worker owning its bucket."""
        bucket_id = container_bucket_id(container)
        owner = next(
            (w for w in self.workers.values() if bucket_id in w.bucket_ids), None
        )
        if owner is None:
            raise RuntimeError(f"no worker owns bucket {bucket_id}")
        ref = uuid.uuid4().hex
        ev = asyncio.Event()
        self._load_acks[ref] = ev
        await owner.send({"kind": "LOAD_IMPORT", "ref": ref}, binary=container)
        try:
            await asyncio.wait_for(ev.wait(), timeout)
        finally:
            self._load_acks.pop(ref, None)
        self.data_loaded = True

    async def submit(self, doc: dict, memberships: dict | None = None) -> Execution:
        """Broadcast a validated query document; returns the tracked execution."""
        execution_id = uuid.uuid4().hex[:12]
        execution = Execution(execution_id, doc, list(self.workers))
        self.executions[execution_id] = execution
        if not self.workers:
            execution.finish("FAILED", "no workers registered")
            return execution
        execution.state = "RUNNING"
        payload = {
            "kind": "EXECUTE_QUERY",
            "executionId": execution_id,
            "query": doc,
            "memberships": memberships or {},
        }
        for w in list(self.workers.values()):
            try:
                await w.send(payload)
            except (ConnectionResetError, BrokenPipeError):
                self._worker_lost(w, "connection lost")
                return execution
        return execution

    async def cancel(self, execution_id: str):
        execution = self.executions.get(execution_id)
        if execution is None or execution.state != "RUNNING":
            return
        execution.finish("CANCELED", "canceled by user")
        for w in self.workers.values():
            await w.send({"kind": "CANCEL", "executionId": execution_id})

    async def wait(self, execution_id: str, timeout: float | None = None) -> Execution:
        execution = self.executions[execution_id]
        if timeout is None:
            await execution.done_event.wait()
        else:
            await asyncio.wait_for(execution.done_event.wait(), timeout)
        return execution
