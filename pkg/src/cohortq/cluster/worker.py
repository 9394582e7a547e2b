"""Worker node: receives its bucket assignment and import containers, plans
incoming queries locally and streams result batches back to the manager.

One receive loop feeds a per-query evaluation task; evaluation itself runs in
a thread so the loop stays responsive for PING and CANCEL."""

from __future__ import annotations

import asyncio
import logging
import threading

from ..container import read_container
from ..dateset import DateSet
from ..engine import build_plan
from ..engine.worker import execute_on_worker
from ..querymodel import parse_query
from ..registry import DatasetRegistry
from ..store import DataStore
from .protocol import PROTOCOL_VERSION, read_message, write_message

log = logging.getLogger("cohortq.worker")


class WorkerNode:
    def __init__(self, worker_id: str, pool_size: int = 2, batch_size: int = 1000):
        self.worker_id = worker_id
        self.pool_size = pool_size
        self.batch_size = batch_size
        self.registry: DatasetRegistry | None = None
        self.store: DataStore | None = None
        self.bucket_count = 100
        self.bucket_ids: list[int] = []
        self._cancels: dict[str, threading.Event] = {}
        self._writer: asyncio.StreamWriter | None = None
        self._send_lock = asyncio.Lock()
        self.registered = asyncio.Event()
        self.rejected: str | None = None
        self.canceled_ids: list[str] = []

    async def _send(self, doc: dict, binary: bytes = b""):
        async with self._send_lock:
            await write_message(self._writer, doc, binary)

    async def run(self, host: str, port: int):
        """Connect, register and serve until the connection closes."""
        reader, writer = await asyncio.open_connection(host, port)
        self._writer = writer
        await write_message(
            writer, {"kind": "REGISTER", "workerId": self.worker_id, "v": PROTOCOL_VERSION}
        )
        try:
            while True:
                doc, binary = await read_message(reader)
                await self._dispatch(doc, binary)
        except (asyncio.IncompleteReadError, ConnectionResetError):
            log.info("worker %s: connection closed", self.worker_id)
        finally:
            writer.close()

    async def _dispatch(self, doc: dict, binary: bytes):
        kind = doc["kind"]
        if kind == "REGISTERED":
            self.registry = DatasetRegistry.from_config_document(doc["dataset"])
            self.store = DataStore(self.registry)
            self.bucket_count = doc["bucketCount"]
            self.registered.set()
        elif kind == "REJECTED":
            self.rejected = doc.get("error", "rejected")
            log.error("worker %s rejected: %s", self.worker_id, self.rejected)
            self.registered.set()
            raise asyncio.IncompleteReadError(b"", 0)
        elif kind == "ASSIGN_BUCKETS":
            self.bucket_ids = list(doc["bucketIds"])
        elif kind == "LOAD_IMPORT":
            bucket, _stats = await asyncio.to_thread(read_container, binary)
            if bucket.table_name not in self.registry.schemas:
                raise RuntimeError(f"container for unknown table {bucket.table_name!r}")
            await asyncio.to_thread(self.store.add_bucket, bucket)
            await self._send({"kind": "LOAD_DONE", "ref": doc.get("ref", "")})
        elif kind == "EXECUTE_QUERY":
            asyncio.ensure_future(self._execute(doc))
        elif kind == "CANCEL":
            self.canceled_ids.append(doc.get("executionId", ""))
            ev = self._cancels.get(doc.get("executionId", ""))
            if ev:
                ev.set()
        elif kind == "PING":
            await self._send({"kind": "PONG"})

    async def _execute(self, doc: dict):
        execution_id = doc["executionId"]
        cancel = threading.Event()
        self._cancels[execution_id] = cancel
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue()
        _done = object()  # sentinel: (None = clean end) or error text follows

        def run_query():
            error = None
            try:
                ast = parse_query(doc["query"], self.registry)
                memberships = {
                    eid: {e: DateSet.from_document(d) for e, d in table.items()}
                    for eid, table in doc.get("memberships", {}).items()
                }
                plan = build_plan(ast, self.registry, memberships)
                my_buckets = sorted(
                    (set(self.bucket_ids) & set(self.store.bucket_ids()))
                    | {
                        b
                        for b in self.bucket_ids
                        if not plan.needs_scan_hit and self._membership_bucket(plan, b)
                    }
                )
                for batch in execute_on_worker(
                    plan,
                    self.store,
                    self.bucket_count,
                    pool_size=self.pool_size,
                    bucket_ids=my_buckets,
                    batch_size=self.batch_size,
                ):
                    if cancel.is_set():
                        break
                    asyncio.run_coroutine_threadsafe(
                        queue.put([ln.to_document() for ln in batch]), loop
                    ).result()
            except Exception as exc:  # single failure result for the whole query
                log.exception("worker %s: execution %s failed", self.worker_id, execution_id)
                error = f"{type(exc).__name__}: {exc}"
            asyncio.run_coroutine_threadsafe(queue.put((_done, error)), loop).result()

        asyncio.ensure_future(asyncio.to_thread(run_query))
        try:
            while True:
                item = await queue.get()
                if isinstance(item, tuple) and item[0] is _done:
                    error = item[1]
                    if cancel.is_set():
                        return
                    if error is None:
                        await self._send({"kind": "WORKER_DONE", "executionId": execution_id})
                    else:
                        await self._send(
                            {
                                "kind": "WORKER_FAILED",
                                "executionId": execution_id,
                                "error": error,
                            }
                        )
                    return
                await self._send(
                    {"kind": "RESULT_BATCH", "executionId": execution_id, "lines": item}
                )
        finally:
            self._cancels.pop(execution_id, None)

    def _membership_bucket(self, plan, bucket_id: int) -> bool:
        from ..bucket import entity_bucket

        return any(
            entity_bucket(e, self.bucket_count) == bucket_id
            for e in plan.membership_entities()
        )
