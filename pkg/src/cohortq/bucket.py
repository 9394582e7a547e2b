"""Entity-partitioned buckets: contiguous per-entity row layout with a seek index."""

from __future__ import annotations

import numpy as np

from .blocks import _Block, encode_column
from .columns import TableSchema
from .errors import PartitionError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1


def stable_hash64(text: str) -> int:
    """FNV-1a over UTF-8; stable across processes and platforms."""
    h = _FNV_OFFSET
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _U64
    return h


def entity_bucket(entity: str, bucket_count: int) -> int:
    return stable_hash64(entity) % bucket_count


class Bucket:
    """All events of one import for the entities hashing to one bucket id.

    Rows of each entity are contiguous; ``entity_index`` maps entity id to its
    [start, end) row range, which is what makes single-entity seeks cheap.
    Immutable after construction.
    """

    def __init__(
        self,
        bucket_id: int,
        table_name: str,
        import_id: str,
        blocks: dict[str, _Block],
        entity_index: dict[str, tuple[int, int]],
        row_count: int,
    ):
        self.bucket_id = bucket_id
        self.table_name = table_name
        self.import_id = import_id
        self.blocks = blocks
        self.entity_index = entity_index
        self.row_count = row_count
        self.entities = list(entity_index.keys())
        # flat offsets for chunked evaluation: entity i spans [starts[i], starts[i+1])
        self.starts = np.fromiter(
            (entity_index[e][0] for e in self.entities), dtype=np.int64, count=len(self.entities)
        )
        self.ends = np.fromiter(
            (entity_index[e][1] for e in self.entities), dtype=np.int64, count=len(self.entities)
        )

    def entity_range(self, entity: str) -> tuple[int, int] | None:
        return self.entity_index.get(entity)

    @property
    def blocks_nbytes(self) -> int:
        return sum(b.nbytes for b in self.blocks.values())

    @property
    def entity_index_nbytes(self) -> int:
        return sum(len(e.encode("utf-8")) + 4 for e in self.entities) + 8 * (len(self.entities) + 1)

    @property
    def nbytes(self) -> int:
        return self.blocks_nbytes + self.entity_index_nbytes


def build_bucket(
    rows: list[tuple[str, dict]],
    schema: TableSchema,
    bucket_id: int,
    import_id: str = "import",
    bucket_count: int | None = None,
) -> Bucket:
    """Group rows by entity (first-appearance order, stable within an entity)
    and encode every column.

    ``rows`` are (entity_id, {column: value}) pairs. When ``bucket_count`` is
    given, each entity is checked to actually hash to ``bucket_id``.
    """
    groups: dict[str, list[int]] = {}
    for i, (entity, _) in enumerate(rows):
        if bucket_count is not None and entity_bucket(entity, bucket_count) != bucket_id:
            raise PartitionError(
                f"entity {entity!r} hashes to bucket "
                f"{entity_bucket(entity, bucket_count)}, not {bucket_id}"
            )
        groups.setdefault(entity, []).append(i)

    order: list[int] = []
    entity_index: dict[str, tuple[int, int]] = {}
    pos = 0
    for entity, idxs in groups.items():
        entity_index[entity] = (pos, pos + len(idxs))
        order.extend(idxs)
        pos += len(idxs)

    blocks: dict[str, _Block] = {}
    for col in schema.columns:
        values = [rows[i][1].get(col.name) for i in order]
        blocks[col.name] = encode_column(values, col.type)

    return Bucket(bucket_id, schema.name, import_id, blocks, entity_index, len(rows))
