"""Per-import, per-bucket statistics used for partition pruning.

Soundness contract: any value in the bucket lies within the recorded
[lo, hi]; any concept node a row can resolve to is in the recorded node set.
A query planner may skip a bucket only when these sets prove no event can
contribute.
"""

from __future__ import annotations

import numpy as np

from .blocks import BoolBlock, IntBlock, RangeBlock, StringBlock
from .bucket import Bucket
from .columns import ColumnType


class ColumnStats:
    __slots__ = ("lo", "hi", "unbounded_lo", "unbounded_hi", "distinct", "empty")

    def __init__(self, lo, hi, unbounded_lo=False, unbounded_hi=False, distinct=None, empty=False):
        self.lo = lo
        self.hi = hi
        self.unbounded_lo = unbounded_lo
        self.unbounded_hi = unbounded_hi
        self.distinct = distinct
        self.empty = empty

    def window_overlaps(self, lo: int | None, hi: int | None) -> bool:
        """Could any value intersect [lo, hi] (None = open side)?"""
        if self.empty:
            return False
        eff_lo = None if self.unbounded_lo else self.lo
        eff_hi = None if self.unbounded_hi else self.hi
        if lo is not None and eff_hi is not None and eff_hi < lo:
            return False
        if hi is not None and eff_lo is not None and eff_lo > hi:
            return False
        return True

    def to_document(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "unboundedLo": self.unbounded_lo,
            "unboundedHi": self.unbounded_hi,
            "distinct": self.distinct,
            "empty": self.empty,
        }

    @staticmethod
    def from_document(doc: dict) -> "ColumnStats":
        return ColumnStats(
            doc["lo"],
            doc["hi"],
            doc["unboundedLo"],
            doc["unboundedHi"],
            doc["distinct"],
            doc["empty"],
        )


class ImportStatistics:
    def __init__(
        self,
        columns: dict[str, ColumnStats],
        node_sets: dict[tuple[str, str], np.ndarray],
        row_count: int,
        entity_count: int,
    ):
        self.columns = columns
        # (concept name, column name) -> sorted dfs_lo values of resolvable nodes
        self.node_sets = node_sets
        self.row_count = row_count
        self.entity_count = entity_count

    def nodes_overlap(self, concept: str, column: str, lo: int, hi: int) -> bool:
        """True if any resolvable node of the column lies in dfs interval [lo, hi]."""
        key = (concept, column)
        arr = self.node_sets.get(key)
        if arr is None or len(arr) == 0:
            return False
        i = int(np.searchsorted(arr, lo, side="left"))
        return i < len(arr) and int(arr[i]) <= hi

    def to_document(self) -> dict:
        return {
            "rowCount": self.row_count,
            "entityCount": self.entity_count,
            "columns": {name: st.to_document() for name, st in self.columns.items()},
            "nodeSets": [
                {"concept": c, "column": col, "los": [int(x) for x in arr]}
                for (c, col), arr in self.node_sets.items()
            ],
        }

    @staticmethod
    def from_document(doc: dict) -> "ImportStatistics":
        return ImportStatistics(
            {name: ColumnStats.from_document(d) for name, d in doc["columns"].items()},
            {
                (e["concept"], e["column"]): np.array(e["los"], dtype=np.int64)
                for e in doc["nodeSets"]
            },
            doc["rowCount"],
            doc["entityCount"],
        )


def _int_stats(block: IntBlock) -> ColumnStats:
    vals, present = block.ints(0, block.row_count)
    sel = vals[present]
    if len(sel) == 0:
        return ColumnStats(None, None, empty=True)
    return ColumnStats(int(sel.min()), int(sel.max()), distinct=int(len(np.unique(sel))))


def _range_stats(block: RangeBlock) -> ColumnStats:
    mins, maxes, open_lo, open_hi, present = block.range_arrays(0, block.row_count)
    if not present.any():
        return ColumnStats(None, None, empty=True)
    closed_lo = present & ~open_lo
    closed_hi = present & ~open_hi
    lo = int(mins[closed_lo].min()) if closed_lo.any() else None
    hi = int(maxes[closed_hi].max()) if closed_hi.any() else None
    return ColumnStats(
        lo,
        hi,
        unbounded_lo=bool((present & open_lo).any()),
        unbounded_hi=bool((present & open_hi).any()),
    )


def compute_statistics(bucket: Bucket, concept_assignments: dict | None = None) -> ImportStatistics:
    """``concept_assignments`` maps (concept name, column name) to an Assignment
    (anything exposing ``candidate_los()``) for every concept-bearing column."""
    columns: dict[str, ColumnStats] = {}
    for name, block in bucket.blocks.items():
        if isinstance(block, IntBlock):
            columns[name] = _int_stats(block)
        elif isinstance(block, RangeBlock):
            columns[name] = _range_stats(block)
        elif isinstance(block, StringBlock):
            empty = len(block.dictionary) == 0
            columns[name] = ColumnStats(None, None, distinct=len(block.dictionary), empty=empty)
        elif isinstance(block, BoolBlock):
            vals, present = block.bool_array(0, block.row_count)
            sel = vals[present]
            empty = len(sel) == 0
            distinct = int(len(np.unique(sel))) if not empty else 0
            columns[name] = ColumnStats(None, None, distinct=distinct, empty=empty)

    node_sets: dict[tuple[str, str], np.ndarray] = {}
    if concept_assignments:
        for (concept, column), assignment in concept_assignments.items():
            node_sets[(concept, column)] = assignment.candidate_los()

    return ImportStatistics(columns, node_sets, bucket.row_count, len(bucket.entities))
