"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. The heavyweight corpus criteria are marked slow but run by default.
"""

import asyncio
import glob
import json
import os
import random
import time
from collections import Counter
from datetime import date

import numpy as np
import pytest

from cohortq import blocks as blocks_mod
from cohortq.blocks import read_value, reset_full_decode_count
from cohortq.bucket import build_bucket, entity_bucket
from cohortq.columns import day_of
from cohortq.dateset import DateSet
from cohortq.engine import build_plan, execute_on_worker
from cohortq.querymodel import parse_query
from cohortq.synth import demo_registry

from fixtures_common import (
    claims_registry,
    engine_multiset,
    line_tuple,
    load_store,
    oracle_multiset,
    run_engine,
    split_view,
)
from generators import gen_dataset, gen_membership, gen_query_doc, random_code_pool
from oracle import Oracle, from_epoch_ranges

FIXTURE = os.path.join(os.path.dirname(__file__), "fixtures", "parkinson")
BUCKETS = 100


def report(name: str, ok: bool, details: str = ""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {details}")
    assert ok, f"{name}: {details}"


@pytest.fixture(scope="module")
def registry():
    return claims_registry()


# ---------------------------------------------------------------------------
# Criterion: oracle equivalence


def test_acceptance_oracle_equivalence(registry):
    """>= 50 random datasets x >= 200 random queries against the independent
    brute-force interpreter; exact equality, zero tolerance."""
    t0 = time.time()
    rng = random.Random(20260810)
    n_datasets = 50
    queries_per_dataset = 5
    pairs = 0
    failures = []
    datasets = []
    for d in range(n_datasets):
        # mix of sizes up to the caps (<= 200 entities, <= 5000 events)
        max_entities = rng.choice([30, 60, 120, 200])
        max_events = rng.choice([400, 1200, 5000])
        splits = 2 if d % 5 == 0 else 1
        tables = gen_dataset(rng, max_entities=max_entities, max_events=max_events)
        store = load_store(registry, tables, BUCKETS, import_splits=splits)
        members = {"saved-1": gen_membership(rng, tables)}
        oracle = Oracle(
            registry,
            split_view(tables, splits),
            {
                eid: {e: from_epoch_ranges(r) for e, r in t.items()}
                for eid, t in members.items()
            },
        )
        datasets.append((tables, store, members, oracle))

    all_queries = []
    for d, (tables, store, members, oracle) in enumerate(datasets):
        for q in range(queries_per_dataset):
            doc = gen_query_doc(rng, ["saved-1"])
            all_queries.append(doc)
            got = engine_multiset(
                run_engine(registry, store, parse_query(doc, registry), BUCKETS, members)
            )
            want = oracle_multiset(oracle.execute(parse_query(doc, registry)))
            pairs += 1
            if got != want:
                failures.append((d, q, doc))
    # cross runs: every query also runs against a second dataset
    for i, doc in enumerate(all_queries):
        tables, store, members, oracle = datasets[(i * 7 + 13) % n_datasets]
        got = engine_multiset(
            run_engine(registry, store, parse_query(doc, registry), BUCKETS, members)
        )
        want = oracle_multiset(oracle.execute(parse_query(doc, registry)))
        pairs += 1
        if got != want:
            failures.append(("cross", i, doc))

    dt = time.time() - t0
    report(
        "oracle equivalence",
        not failures,
        f"{n_datasets} datasets, {len(all_queries)} queries, {pairs} runs, "
        f"{dt:.1f}s, {len(failures)} mismatches",
    )


# ---------------------------------------------------------------------------
# Criterion: compression on a 1M-event corpus


@pytest.mark.slow
def test_acceptance_compression(tmp_path):
    from cohortq.benchmarks import run_compression_bench

    doc = run_compression_bench(events=1_000_000, entities=75_000, out_dir=str(tmp_path))
    raw = doc["rawBytes"]
    encoded = doc["encodedBytes"]
    with_index = encoded + doc["entityIndexBytes"]
    ok = encoded <= 0.4 * raw
    report(
        "compression",
        ok,
        f"encoded {encoded:,}B = {100 * encoded / raw:.1f}% of raw {raw:,}B "
        f"(with entity index {100 * with_index / raw:.1f}%); "
        f"gzip {doc['gzipBytes']:,}B = {100 * doc['gzipBytes'] / raw:.1f}% (no seeking)",
    )


# ---------------------------------------------------------------------------
# Criterion: seekability


def test_acceptance_seekability(registry):
    rng = random.Random(99)
    tables = gen_dataset(rng, max_entities=200, max_events=5000)
    raw = tables["outpatient_diagnosis"]
    schema = registry.schemas["outpatient_diagnosis"]
    rows = [(e, r) for e, rlist in raw.items() for r in rlist]
    bucket = build_bucket(rows, schema, 0, "seek")
    columns = [c.name for c in schema.columns]
    entities = list(raw.keys())

    reset_full_decode_count()
    probes = 10_000
    mismatches = 0
    for _ in range(probes):
        e = rng.choice(entities)
        s, eend = bucket.entity_index[e]
        got = [
            {c: read_value(bucket.blocks[c], i) for c in columns} for i in range(s, eend)
        ]
        if got != raw[e]:
            mismatches += 1
    decodes = blocks_mod.FULL_DECODE_COUNT
    report(
        "seekability",
        mismatches == 0 and decodes == 0,
        f"{probes} entity probes, {mismatches} mismatches, "
        f"{decodes} full-block decompressions during seeks",
    )


# ---------------------------------------------------------------------------
# Criterion: concept resolution goldens


def test_acceptance_concept_resolution(registry):
    from cohortq.concepts import parse_concept
    from test_concepts import CONNECTOR_DOC, HOSPITAL_SCHEMA, TREE_DOC

    tree = parse_concept(dict(TREE_DOC, connectors=[CONNECTOR_DOC]), HOSPITAL_SCHEMA)
    node = tree.resolve("G2011")
    chain_ok = node is not None and node.path_id == "g20-g26.g20.g20_1.g20_11"

    # subtree query covers every descendant's matches
    rng = random.Random(3)
    tables = gen_dataset(rng, max_entities=150, max_events=3000)
    store = load_store(registry, tables, BUCKETS)

    def entity_set(concept_id):
        doc = {
            "type": "CONCEPT_QUERY",
            "root": {
                "type": "CONCEPT",
                "ids": [concept_id],
                "tables": [
                    {"id": "dataset.icd.physician_diagnoses"},
                    {"id": "dataset.icd.hospital_diagnoses"},
                ],
            },
        }
        lines = run_engine(registry, store, parse_query(doc, registry), BUCKETS)
        return {ln.entity for ln in lines}

    parent = entity_set("dataset.icd.g00-g99.g20-g26")
    descendants = set()
    for d in (
        "dataset.icd.g00-g99.g20-g26.g20",
        "dataset.icd.g00-g99.g20-g26.g20.g20_conf",
        "dataset.icd.g00-g99.g20-g26.g20.g20_1",
        "dataset.icd.g00-g99.g20-g26.g20.g20_1.g20_11",
        "dataset.icd.g00-g99.g20-g26.g25",
    ):
        descendants |= entity_set(d)
    subtree_ok = descendants <= parent

    # trie resolution equals naive descent on 1e5 random codes
    full_tree = registry.concepts["icd"]
    pool = random_code_pool(random.Random(8), 100_000)
    kinds = [None, "confirmed", "primary", "suspected"]
    trie_ok = True
    for i, code in enumerate(pool):
        aux = {"kind": kinds[i % 4]}
        a = full_tree.resolve(code, aux)
        b = full_tree.resolve_naive(code, aux)
        if (a is None) != (b is None) or (a is not None and a.path_id != b.path_id):
            trie_ok = False
            break
    report(
        "concept resolution",
        chain_ok and subtree_ok and trie_ok,
        f"golden chain {'ok' if chain_ok else 'BAD'}; subtree covers descendants "
        f"{'ok' if subtree_ok else 'BAD'} ({len(parent)} >= {len(descendants)} entities); "
        f"trie==naive on {len(pool):,} codes {'ok' if trie_ok else 'BAD'}",
    )


# ---------------------------------------------------------------------------
# Criterion: golden result file


def test_acceptance_golden_file(tmp_path):
    from fastapi.testclient import TestClient

    from cohortq.api import QueryService, create_app
    from cohortq.config import ServiceConfig
    from cohortq.ingest import ImportDescriptor, preprocess

    registry = demo_registry()
    imports = tmp_path / "imports"
    for src, desc in (
        ("outpatient.csv", "outpatient.import.json"),
        ("hospital.csv", "hospital.import.json"),
    ):
        d = ImportDescriptor.load(os.path.join(FIXTURE, desc))
        preprocess(
            d,
            registry.schemas[d.table],
            os.path.join(FIXTURE, src),
            str(imports),
            bucket_count=20,
            compare_gzip=False,
        )
    cfg = ServiceConfig(
        import_dir=str(imports), data_dir=str(tmp_path / "data"), bucket_count=20, workers=1
    )
    service = QueryService(registry, cfg)
    with open(os.path.join(FIXTURE, "query.json")) as fh:
        query = json.load(fh)
    with open(os.path.join(FIXTURE, "golden.csv"), "rb") as fh:
        golden = fh.read()
    with TestClient(create_app(service)) as client:
        eid = client.post("/api/queries", json=query).json()["executionId"]
        for _ in range(400):
            body = client.get(f"/api/queries/{eid}").json()
            if body["state"] != "RUNNING":
                break
            time.sleep(0.025)
        got = client.get(f"/api/queries/{eid}/result.csv").content
    ok = got == golden
    report(
        "golden result file",
        ok,
        f"{len(golden)} bytes, byte-identical: {ok} "
        f"(11 rows incl. coalesced year, single-day stays, '-' cells)",
    )


# ---------------------------------------------------------------------------
# Criterion: distribution transparency


def test_acceptance_distribution_transparency(registry):
    from test_cluster import lines_multiset, start_loaded_cluster

    t0 = time.time()
    rng = random.Random(606060)
    tables = gen_dataset(rng, max_entities=200, max_events=4000)
    docs = [gen_query_doc(rng) for _ in range(30)]

    async def run(n_workers):
        cluster = await start_loaded_cluster(registry, tables, n_workers)
        out = []
        for doc in docs:
            execution = await cluster.submit_and_wait(doc)
            assert execution.state == "DONE", execution.error
            out.append(lines_multiset(execution.lines))
        await cluster.stop()
        return out

    single = asyncio.run(run(1))
    three = asyncio.run(run(3))
    same = sum(1 for a, b in zip(single, three) if a == b)
    dt = time.time() - t0
    report(
        "distribution transparency",
        same == len(docs),
        f"{len(docs)} queries over 100 buckets: {same}/{len(docs)} identical "
        f"multisets with 1 vs 3 workers ({dt:.1f}s)",
    )


# ---------------------------------------------------------------------------
# Criterion: failure semantics


def test_acceptance_failure_semantics(registry, monkeypatch):
    import cohortq.cluster.worker as worker_mod
    from test_cluster import start_loaded_cluster

    real_execute = worker_mod.execute_on_worker

    def slow_execute(*args, **kwargs):
        for batch in real_execute(*args, **kwargs):
            time.sleep(0.05)
            yield batch
        time.sleep(0.5)

    monkeypatch.setattr(worker_mod, "execute_on_worker", slow_execute)
    rng = random.Random(42)
    tables = gen_dataset(rng, max_entities=150, max_events=2000)

    async def run():
        cluster = await start_loaded_cluster(registry, tables, 3)
        doc = {
            "type": "CONCEPT_QUERY",
            "root": {
                "type": "CONCEPT",
                "ids": ["dataset.icd"],
                "tables": [{"id": "dataset.icd.physician_diagnoses"}],
            },
        }
        execution = await cluster.manager.submit(doc)
        await asyncio.sleep(0.1)
        cluster.workers[1]._writer.close()  # kill one worker mid-query
        await cluster.manager.wait(execution.id, 30)
        await asyncio.sleep(0.3)
        state = execution.state
        no_partial = execution.lines == []
        cancels = all(
            execution.id in w.canceled_ids for w in (cluster.workers[0], cluster.workers[2])
        )
        await cluster.stop()
        return state, no_partial, cancels

    state, no_partial, cancels = asyncio.run(run())
    report(
        "failure semantics",
        state == "FAILED" and no_partial and cancels,
        f"state={state}, partial results discarded={no_partial}, "
        f"CANCEL reached remaining workers={cancels}",
    )


# ---------------------------------------------------------------------------
# Criterion: parallel scaling (soft; report numbers)


@pytest.mark.slow
def test_acceptance_parallel_scaling():
    from cohortq.benchmarks import (
        build_scaling_store,
        kernel_thread_scaling,
        run_scaling_bench,
    )

    cores = os.cpu_count() or 1
    registry, store = build_scaling_store(100_000, 12)
    doc = run_scaling_bench(
        100_000, 12, pools=[1, 2, 4], registry_store=(registry, store)
    )
    speedup4 = doc["pools"][4].get("speedup", 0.0)
    best = max(p.get("speedup", 1.0) for p in doc["pools"].values())
    if cores >= 4:
        ok = speedup4 >= 2.0
        detail = f"4 units = x{speedup4:.2f} on {cores} cores (need >= 2.0)"
    else:
        # soft criterion: 2x from 4 units needs >= 4 cores. On this machine,
        # verify the nogil kernel layer scales with the cores that do exist
        # and report the end-to-end numbers.
        kscale = kernel_thread_scaling(threads=min(2, cores))
        ok = cores < 2 or kscale >= 1.4
        detail = (
            f"only {cores} cores: 2x with 4 units not attainable here; "
            f"kernel layer x{kscale:.2f} at {min(2, cores)} threads (need >= 1.4); "
            f"end-to-end 1 unit {doc['pools'][1]['entitiesPerSecond']:,}/s, "
            f"4 units {doc['pools'][4]['entitiesPerSecond']:,}/s "
            f"(best x{best:.2f})"
        )
    report("parallel scaling (soft)", ok, detail)


# ---------------------------------------------------------------------------
# Criterion: date-set algebra vs per-day bitmaps


def test_acceptance_dateset_algebra():
    lo_day = day_of(date(2013, 1, 1))
    hi_day = day_of(date(2018, 12, 31))
    n_days = hi_day - lo_day + 1
    rng = random.Random(1234)

    def random_ranges():
        out = []
        for _ in range(rng.randrange(0, 6)):
            a = rng.randrange(lo_day, hi_day + 1)
            out.append((a, min(a + rng.randrange(0, 500), hi_day)))
        return out

    pool = [random_ranges() for _ in range(10_000)]
    sets = [DateSet(r) for r in pool]

    def bitmap(ds):
        m = np.zeros(n_days, dtype=bool)
        for lo, hi in ds.ranges:
            m[lo - lo_day : hi - lo_day + 1] = True
        return m

    maps = [bitmap(s) for s in sets]
    bad = 0
    checked = 0
    for _ in range(10_000):
        i = rng.randrange(len(sets))
        j = rng.randrange(len(sets))
        u = bitmap(sets[i].union(sets[j]))
        x = bitmap(sets[i].intersect(sets[j]))
        if not (u == (maps[i] | maps[j])).all():
            bad += 1
        if not (x == (maps[i] & maps[j])).all():
            bad += 1
        wl = rng.randrange(lo_day, hi_day + 1)
        wh = min(wl + rng.randrange(0, 900), hi_day)
        w = np.zeros(n_days, dtype=bool)
        w[wl - lo_day : wh - lo_day + 1] = True
        if not (bitmap(sets[i].mask(wl, wh)) == (maps[i] & w)).all():
            bad += 1
        checked += 3
    report(
        "date-set algebra",
        bad == 0,
        f"{len(sets):,} random sets, {checked:,} bitmap comparisons over "
        f"2013-2018, {bad} mismatches",
    )
