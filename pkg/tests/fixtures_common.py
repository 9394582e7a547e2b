"""Shared test fixtures: loaders around the package's demo claims dataset."""

from __future__ import annotations

from collections import Counter

from cohortq.bucket import build_bucket, entity_bucket
from cohortq.csvout import render_cell
from cohortq.dateset import DateSet
from cohortq.engine import build_plan, execute_on_worker
from cohortq.registry import DatasetRegistry
from cohortq.store import DataStore
from cohortq.synth import HOSPITAL_TABLE, ICD_CONCEPT, OUTPATIENT_TABLE, demo_registry

def claims_registry(dataset="dataset") -> DatasetRegistry:
    return demo_registry(dataset)


def load_store(
    registry: DatasetRegistry,
    tables: dict[str, dict[str, list[dict]]],
    bucket_count: int = 10,
    import_splits: int = 1,
) -> DataStore:
    """Build a DataStore from raw rows {table: {entity: [row dicts]}}.

    ``import_splits > 1`` splits each table round-robin (per entity event
    index) into several imports, exercising cross-import merging."""
    store = DataStore(registry)
    for tname, by_entity in tables.items():
        schema = registry.schemas[tname]
        for split in range(import_splits):
            rows_by_bucket: dict[int, list] = {}
            for entity, rows in by_entity.items():
                picked = [r for i, r in enumerate(rows) if i % import_splits == split]
                if not picked:
                    continue
                b = entity_bucket(entity, bucket_count)
                for r in picked:
                    rows_by_bucket.setdefault(b, []).append((entity, r))
            for b, rows in rows_by_bucket.items():
                store.add_bucket(
                    build_bucket(rows, schema, b, f"{tname}.imp{split}", bucket_count)
                )
    return store


def split_view(tables: dict, import_splits: int) -> dict:
    """Rows in the order a store loaded via ``load_store`` observes them:
    all of import 0's rows per entity, then import 1's, and so on."""
    if import_splits <= 1:
        return tables
    out = {}
    for tname, by_entity in tables.items():
        out[tname] = {}
        for entity, rows in by_entity.items():
            ordered = []
            for split in range(import_splits):
                ordered.extend(r for i, r in enumerate(rows) if i % import_splits == split)
            out[tname][entity] = ordered
    return out


def line_tuple(line) -> tuple:
    """Engine ResultLine rendered into the oracle's comparison shape."""
    return (
        line.entity,
        line.secondary,
        line.dates.render(),
        tuple(render_cell(v) for v in line.values),
    )


def run_engine(
    registry,
    store,
    ast,
    bucket_count=10,
    memberships=None,
    pool_size=1,
    no_skip=False,
    context_out=None,
):
    engine_members = None
    if memberships:
        engine_members = {
            eid: {e: DateSet(ranges) for e, ranges in table.items()}
            for eid, table in memberships.items()
        }
    plan = build_plan(ast, registry, engine_members)
    lines = []
    for batch in execute_on_worker(
        plan,
        store,
        bucket_count,
        pool_size=pool_size,
        no_skip=no_skip,
        context_out=context_out,
    ):
        lines.extend(batch)
    return lines


def engine_multiset(lines) -> Counter:
    return Counter(line_tuple(ln) for ln in lines)


def oracle_multiset(rows) -> Counter:
    return Counter(rows)
