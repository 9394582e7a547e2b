"""Single-process cluster: manager plus N workers in one event loop,
connected over loopback so the message path is identical to a real
deployment."""

from __future__ import annotations

import asyncio

from ..registry import DatasetRegistry
from .manager import Manager
from .worker import WorkerNode


class LocalCluster:
    def __init__(
        self,
        registry: DatasetRegistry,
        n_workers: int = 1,
        bucket_count: int = 100,
        pool_size: int = 2,
        heartbeat_interval: float = 5.0,
        heartbeat_miss_limit: int = 3,
        listen: tuple[str, int] = ("127.0.0.1", 0),
        expect_external: int = 0,
    ):
        self.manager = Manager(
            registry,
            bucket_count=bucket_count,
            heartbeat_interval=heartbeat_interval,
            heartbeat_miss_limit=heartbeat_miss_limit,
        )
        self.listen = listen
        self.expect_external = expect_external
        self.workers = [WorkerNode(f"local-{i}", pool_size=pool_size) for i in range(n_workers)]
        self._worker_tasks: list[asyncio.Task] = []

    async def start(self):
        host, port = await self.manager.start(*self.listen)
        self.address = (host, port)
        for w in self.workers:
            self._worker_tasks.append(asyncio.create_task(w.run(host, port)))
        for w in self.workers:
            await asyncio.wait_for(w.registered.wait(), 10)
            if w.rejected:
                raise RuntimeError(f"worker rejected: {w.rejected}")
        want = len(self.workers) + self.expect_external
        while len(self.manager.workers) < want:
            await asyncio.sleep(0.2)
        return self

    async def load_import(self, container: bytes):
        await self.manager.load_import(container)

    async def submit_and_wait(self, doc: dict, memberships=None, timeout: float = 120.0):
        execution = await self.manager.submit(doc, memberships)
        return await self.manager.wait(execution.id, timeout)

    async def stop(self):
        for t in self._worker_tasks:
            t.cancel()
        await self.manager.stop()
