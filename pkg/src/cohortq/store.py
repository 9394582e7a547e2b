"""Worker-side data store: loaded imports, their statistics and the
precomputed dictionary-to-concept assignments."""

from __future__ import annotations

from .bucket import Bucket
from .concepts import Assignment
from .registry import DatasetRegistry
from .statistics import ImportStatistics, compute_statistics


class LoadedImport:
    """One bucket of one import, with pruning statistics and assignments."""

    def __init__(
        self,
        bucket: Bucket,
        stats: ImportStatistics,
        assignments: dict[tuple[str, str], Assignment],
    ):
        self.bucket = bucket
        self.table = bucket.table_name
        self.import_id = bucket.import_id
        self.bucket_id = bucket.bucket_id
        self.stats = stats
        self.assignments = assignments  # (concept name, column name) -> Assignment


class DataStore:
    def __init__(self, registry: DatasetRegistry):
        self.registry = registry
        self.imports: list[LoadedImport] = []
        self.by_bucket: dict[int, list[LoadedImport]] = {}

    def concept_columns(self, table: str) -> list[tuple[str, str]]:
        """(concept name, column name) pairs that carry concept codes in a table."""
        out = []
        for tree in self.registry.concepts.values():
            for conn in tree.connectors:
                if conn.table == table and (tree.name, conn.column) not in out:
                    out.append((tree.name, conn.column))
        return out

    def add_bucket(self, bucket: Bucket) -> LoadedImport:
        if bucket.table_name not in self.registry.schemas:
            raise ValueError(f"bucket references unknown table {bucket.table_name!r}")
        assignments = {}
        for concept, column in self.concept_columns(bucket.table_name):
            block = bucket.blocks[column]
            tree = self.registry.concepts[concept]
            assignments[(concept, column)] = tree.build_assignment(block.dictionary)
        stats = compute_statistics(bucket, assignments)
        loaded = LoadedImport(bucket, stats, assignments)
        self.imports.append(loaded)
        self.by_bucket.setdefault(bucket.bucket_id, []).append(loaded)
        return loaded

    def bucket_ids(self) -> list[int]:
        return sorted(self.by_bucket.keys())

    def bucket_entities(self, bucket_id: int) -> list[str]:
        """Union of entities over every import of the bucket, deterministic order."""
        seen = {}
        for imp in self.by_bucket.get(bucket_id, []):
            for e in imp.bucket.entities:
                seen[e] = True
        return list(seen.keys())

    def imports_for(self, bucket_id: int, table: str) -> list[LoadedImport]:
        return [imp for imp in self.by_bucket.get(bucket_id, []) if imp.table == table]
