"""Benchmark implementations behind `cohortq bench ...` and benchmarks/*.py."""

from __future__ import annotations

import gzip
import os
import tempfile
import time

import numpy as np

from .bucket import build_bucket, entity_bucket
from .engine import build_plan, execute_on_worker
from .ingest import ImportDescriptor, preprocess
from .querymodel import parse_query
from .store import DataStore
from .synth import (
    OUTPATIENT_IMPORT_DESCRIPTOR,
    demo_registry,
    scaling_rows,
    write_outpatient_corpus,
)


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------------------
# Kernel backends: numba vs pure numpy


def run_kernel_bench(rows: int = 2_000_000) -> dict:
    from ._kernels import _np as np_impl

    try:
        from ._kernels import _nb as nb_impl
    except ImportError:
        nb_impl = None

    rng = np.random.default_rng(0)
    width = 17
    vals = rng.integers(0, 1 << width, size=rows, dtype=np.uint64)
    n_seg = rows // 20
    cuts = np.sort(rng.integers(0, rows + 1, size=n_seg - 1))
    starts = np.concatenate([[0], cuts]).astype(np.int64)
    ends = np.concatenate([cuts, [rows]]).astype(np.int64)
    mask = rng.random(rows) < 0.4
    codes = rng.integers(0, 500, size=rows).astype(np.int64)
    lo = rng.integers(8000, 8100, size=rows).astype(np.int64)
    hi = lo + rng.integers(0, 4, size=rows).astype(np.int64)

    cases = {
        "pack_bits": (lambda impl: impl.pack_bits(vals, width)),
        "unpack_range": None,  # filled below, needs the packed words
        "seg_count": (lambda impl: impl.seg_count(mask, starts, ends)),
        "seg_distinct": (lambda impl: impl.seg_distinct(codes, mask, starts, ends)),
        "seg_interval_cover": (lambda impl: impl.seg_interval_cover(lo, hi, mask, starts, ends)),
    }
    words = np_impl.pack_bits(vals, width)
    cases["unpack_range"] = lambda impl: impl.unpack_range(words, width, 0, rows)

    report: dict = {"rows": rows, "kernels": {}}
    print(f"kernel backends over {rows:,} rows ({n_seg:,} segments)")
    for name, fn in cases.items():
        times = {}
        for label, impl in (("numpy", np_impl), ("numba", nb_impl)):
            if impl is None:
                continue
            fn(impl)  # warm up (JIT compile / cache touch)
            _, dt = _timed(fn, impl)
            times[label] = dt
        line = f"  {name:20s}"
        for label, dt in times.items():
            line += f" {label} {dt * 1000:9.1f} ms"
        if "numba" in times and "numpy" in times and times["numba"] > 0:
            line += f"   speedup x{times['numpy'] / times['numba']:.1f}"
        print(line)
        report["kernels"][name] = times
    return report


# ---------------------------------------------------------------------------
# Compression: encoded blocks vs raw text vs gzip


def run_compression_bench(
    events: int = 1_000_000, entities: int = 75_000, out_dir: str | None = None, seed: int = 1
) -> dict:
    registry = demo_registry()
    schema = registry.schemas["outpatient_diagnosis"]
    descriptor = ImportDescriptor.from_document(
        dict(OUTPATIENT_IMPORT_DESCRIPTOR, label="bench")
    )
    tmp = out_dir or tempfile.mkdtemp(prefix="cohortq-bench-")
    os.makedirs(tmp, exist_ok=True)
    raw_path = os.path.join(tmp, "corpus.csv")
    print(f"generating {events:,} events for {entities:,} entities ...")
    _, gen_dt = _timed(write_outpatient_corpus, raw_path, events, entities, seed)
    raw_bytes = os.path.getsize(raw_path)
    print(f"  corpus: {raw_bytes:,} raw bytes in {gen_dt:.1f}s")

    report, dt = _timed(
        preprocess,
        descriptor,
        schema,
        raw_path,
        os.path.join(tmp, "imports"),
        on_error="fail",
        bucket_count=100,
    )
    doc = report.to_document()
    doc["preprocessSeconds"] = round(dt, 2)
    print(f"  preprocessed in {dt:.1f}s -> {report.buckets} containers")
    print(
        f"  encoded blocks:        {report.encoded_bytes:,} bytes "
        f"({100 - report.reduction_pct:.1f}% of raw, reduction {report.reduction_pct:.1f}%)"
    )
    with_index = report.encoded_bytes + report.entity_index_bytes
    print(
        f"  incl. entity index:    {with_index:,} bytes "
        f"(reduction {report.reduction_with_index_pct:.1f}%)"
    )
    print(
        f"  gzip -6 of raw input:  {report.gzip_bytes:,} bytes "
        f"(reduction {report.gzip_reduction_pct:.1f}%; no per-event seeking)"
    )
    for col, d in report.per_column.items():
        print(f"    {col:14s} raw {d['raw']:>12,}  encoded {d['encoded']:>12,}")
    return doc


# ---------------------------------------------------------------------------
# Worker scaling: pool of 1 vs pool of N over one loaded store


BENCH_QUERY = {
    "type": "CONCEPT_QUERY",
    "root": {
        "type": "CONCEPT",
        "ids": ["dataset.icd.g00-g99.g20-g26.g20"],
        "tables": [
            {
                "id": "dataset.icd.physician_diagnoses",
                "filters": [
                    {
                        "filter": "dataset.icd.physician_diagnoses.kind",
                        "value": "confirmed",
                    },
                    {
                        "filter": "dataset.icd.physician_diagnoses.visits",
                        "value": {"min": 2},
                    },
                    {
                        "filter": "dataset.icd.physician_diagnoses.quarters",
                        "value": {"min": 2},
                    },
                ],
                "selects": [
                    "dataset.icd.physician_diagnoses.visit_count",
                    "dataset.icd.physician_diagnoses.quarter_count",
                    "dataset.icd.physician_diagnoses.physician_count",
                ],
                "dateColumn": "Quarter",
            }
        ],
    },
}


def build_scaling_store(
    entities: int = 100_000, events_per_entity: int = 12, bucket_count: int = 100, seed: int = 2
):
    registry = demo_registry()
    tables = scaling_rows(entities, events_per_entity, seed)
    store = DataStore(registry)
    schema = registry.schemas["outpatient_diagnosis"]
    by_bucket: dict[int, list] = {}
    for entity, rows in tables["outpatient_diagnosis"].items():
        b = entity_bucket(entity, bucket_count)
        for r in rows:
            by_bucket.setdefault(b, []).append((entity, r))
    for b, rows in sorted(by_bucket.items()):
        store.add_bucket(build_bucket(rows, schema, b, "bench.imp0", bucket_count))
    return registry, store


def kernel_thread_scaling(threads: int = 2, rows: int = 1_000_000) -> float:
    """Throughput ratio of N threads vs 1 for the nogil segmented kernels;
    isolates how much of the engine can scale at all on this machine."""
    from concurrent.futures import ThreadPoolExecutor

    from . import _kernels as K

    rng = np.random.default_rng(0)
    codes = rng.integers(0, 500, size=rows).astype(np.int64)
    mask = rng.random(rows) < 0.4
    n_seg = rows // 12
    cuts = np.sort(rng.integers(0, rows + 1, size=n_seg - 1))
    starts = np.concatenate([[0], cuts]).astype(np.int64)
    ends = np.concatenate([cuts, [rows]]).astype(np.int64)

    def job():
        for _ in range(3):
            K.seg_distinct(codes, mask, starts, ends)

    job()  # warm up
    best = 0.0
    for _ in range(3):  # the box may be noisy; take the best of three
        _, serial = _timed(lambda: [job() for _ in range(threads)])
        with ThreadPoolExecutor(threads) as ex:
            _, parallel = _timed(lambda: list(ex.map(lambda _: job(), range(threads))))
        best = max(best, serial / parallel)
    return best


def run_scaling_bench(
    entities: int = 100_000,
    events_per_entity: int = 12,
    pools: list[int] = (1, 4),
    bucket_count: int = 100,
    registry_store=None,
) -> dict:
    if registry_store is None:
        print(f"building store: {entities:,} entities x {events_per_entity} events ...")
        (registry, store), dt = _timed(
            build_scaling_store, entities, events_per_entity, bucket_count
        )
        print(f"  built in {dt:.1f}s")
    else:
        registry, store = registry_store
    ast = parse_query(BENCH_QUERY, registry)
    plan = build_plan(ast, registry)

    def run(pool):
        n = 0
        for batch in execute_on_worker(plan, store, bucket_count, pool_size=pool):
            n += len(batch)
        return n

    run(min(pools))  # warm-up: JIT compile and touch caches
    report = {"entities": entities, "eventsPerEntity": events_per_entity, "pools": {}}
    baseline = None
    for pool in pools:
        lines, dt = _timed(run, pool)
        thr = entities / dt
        report["pools"][pool] = {"seconds": round(dt, 3), "entitiesPerSecond": round(thr)}
        line = f"  pool={pool}: {dt:6.2f}s  {thr:>12,.0f} entities/s  ({lines:,} lines)"
        if baseline is None:
            baseline = dt
        else:
            line += f"  speedup x{baseline / dt:.2f}"
            report["pools"][pool]["speedup"] = round(baseline / dt, 2)
        print(line)
    return report
