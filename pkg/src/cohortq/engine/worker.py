"""Bounded-pool query execution over a worker's buckets.

Buckets are the unit of work: a thread pool consumes a bucket queue, each job
evaluates every entity of its bucket exactly once, and finished lines are
assembled into fixed-size batches. The heavy per-bucket work runs in the
nogil kernels, so the pool scales past one core. Content is deterministic
regardless of pool size; only batch boundaries and ordering vary.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Iterator

from ..bucket import entity_bucket
from ..store import DataStore
from .evaluate import EvalContext, ResultLine, evaluate_bucket
from .plan import QueryPlan

DEFAULT_BATCH_SIZE = 1000


def execution_buckets(plan: QueryPlan, store: DataStore, bucket_count: int) -> list[int]:
    """Buckets a worker has to visit: everything loaded, plus the buckets of
    saved-query members (which may hold no loaded rows at all)."""
    ids = set(store.bucket_ids())
    if not plan.needs_scan_hit:
        for e in plan.membership_entities():
            ids.add(entity_bucket(e, bucket_count))
    return sorted(ids)


def execute_on_worker(
    plan: QueryPlan,
    store: DataStore,
    bucket_count: int,
    pool_size: int = 1,
    bucket_ids: list[int] | None = None,
    batch_size: int = DEFAULT_BATCH_SIZE,
    no_skip: bool = False,
    context_out: list | None = None,
) -> Iterator[list[ResultLine]]:
    """Evaluate the plan over the given buckets, yielding line batches.

    Any evaluation error propagates out of the iterator; callers turn it into
    a single failure result for the whole query on this worker.
    """
    ctx = EvalContext(plan, store, bucket_count, no_skip=no_skip)
    if context_out is not None:
        context_out.append(ctx)
    if bucket_ids is None:
        bucket_ids = execution_buckets(plan, store, bucket_count)

    def run(chunk: list[int]) -> list[ResultLine]:
        out: list[ResultLine] = []
        for bucket_id in chunk:
            try:
                out.extend(evaluate_bucket(ctx, bucket_id))
            finally:
                ctx.purge_bucket(bucket_id)
        return out

    # a few chunks per execution unit: amortizes handoff, still balances load
    pool_size = max(1, pool_size)
    n_chunks = min(len(bucket_ids), pool_size * 4) or 1
    chunks = [list(bucket_ids[i::n_chunks]) for i in range(n_chunks)]

    pending: list[ResultLine] = []
    with ThreadPoolExecutor(max_workers=pool_size) as pool:
        futures = [pool.submit(run, c) for c in chunks if c]
        for fut in as_completed(futures):
            pending.extend(fut.result())
            while len(pending) >= batch_size:
                yield pending[:batch_size]
                pending = pending[batch_size:]
    if pending:
        yield pending
