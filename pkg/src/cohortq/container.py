"""Preprocessed import container: the file format shipped from the ingest
step to the cluster.

Layout (little-endian):

    bytes 0..3    magic "CQI1"
    bytes 4..7    u32 header length
    header        UTF-8 JSON: version, schema hash, table, importId,
                  bucketId, rowCount, entity layout, per-column encoding
                  metadata, column statistics, and a section table
    payload       the raw binary sections (bit-pack words, presence bitsets,
                  entity start offsets) back to back

Section references in the header are indices into the section table, which
records (offset, length, dtype) relative to the payload start. Output is
byte-for-byte deterministic for identical input.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .blocks import BitPackedInt, BitSet, BoolBlock, IntBlock, RangeBlock, StringBlock
from .bucket import Bucket
from .columns import ColumnType, TableSchema
from .statistics import ImportStatistics, compute_statistics

MAGIC = b"CQI1"
VERSION = 1

_DTYPES = {"u64": np.uint64, "u32": np.uint32}


def schema_hash(schema: TableSchema) -> str:
    doc = json.dumps(schema.to_document(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


class _SectionWriter:
    def __init__(self):
        self.parts: list[bytes] = []
        self.table: list[dict] = []
        self.offset = 0

    def add(self, arr: np.ndarray, dtype: str) -> int:
        data = np.ascontiguousarray(arr).tobytes()
        self.table.append({"offset": self.offset, "length": len(data), "dtype": dtype})
        self.parts.append(data)
        self.offset += len(data)
        return len(self.table) - 1


def _packed_meta(packed: BitPackedInt, w: _SectionWriter) -> dict:
    return {
        "base": packed.base,
        "width": packed.width,
        "count": packed.count,
        "words": w.add(packed.words, "u64"),
    }


def _block_meta(block, w: _SectionWriter) -> dict:
    presence = w.add(block.presence.words, "u64")
    if isinstance(block, IntBlock):
        return {
            "kind": "packed_int",
            "type": block.type.value,
            "packed": _packed_meta(block.packed, w),
            "presence": presence,
        }
    if isinstance(block, StringBlock):
        return {
            "kind": "dict_string",
            "dictionary": block.dictionary,
            "codes": _packed_meta(block.codes, w),
            "presence": presence,
        }
    if isinstance(block, BoolBlock):
        return {
            "kind": "bitset",
            "size": block.bits.size,
            "bits": w.add(block.bits.words, "u64"),
            "presence": presence,
        }
    if isinstance(block, RangeBlock):
        return {
            "kind": "range_pair",
            "mins": _packed_meta(block.mins, w),
            "maxes": _packed_meta(block.maxes, w),
            "openLo": w.add(block.open_lo.words, "u64"),
            "openHi": w.add(block.open_hi.words, "u64"),
            "size": block.open_lo.size,
            "presence": presence,
        }
    raise TypeError(f"unknown block {block!r}")


def write_container(bucket: Bucket, schema: TableSchema, stats: ImportStatistics | None = None) -> bytes:
    if stats is None:
        stats = compute_statistics(bucket)
    w = _SectionWriter()
    starts = np.zeros(len(bucket.entities) + 1, dtype=np.uint32)
    for i, e in enumerate(bucket.entities):
        starts[i] = bucket.entity_index[e][0]
    starts[len(bucket.entities)] = bucket.row_count
    starts_section = w.add(starts, "u32")

    columns = []
    for col in schema.columns:
        columns.append({"name": col.name, "block": _block_meta(bucket.blocks[col.name], w)})

    header = {
        "version": VERSION,
        "schemaHash": schema_hash(schema),
        "table": bucket.table_name,
        "importId": bucket.import_id,
        "bucketId": bucket.bucket_id,
        "rowCount": bucket.row_count,
        "entities": bucket.entities,
        "entityStarts": starts_section,
        "columns": columns,
        "statistics": stats.to_document(),
        "sections": w.table,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + b"".join(w.parts)


class _SectionReader:
    def __init__(self, payload: bytes, table: list[dict]):
        self.payload = payload
        self.table = table

    def get(self, idx: int) -> np.ndarray:
        sec = self.table[idx]
        raw = self.payload[sec["offset"] : sec["offset"] + sec["length"]]
        return np.frombuffer(raw, dtype=_DTYPES[sec["dtype"]]).copy()


def _read_packed(meta: dict, r: _SectionReader) -> BitPackedInt:
    return BitPackedInt(meta["base"], meta["width"], r.get(meta["words"]), meta["count"])


def _read_block(meta: dict, row_count: int, r: _SectionReader):
    presence = BitSet(r.get(meta["presence"]), row_count)
    kind = meta["kind"]
    if kind == "packed_int":
        return IntBlock(ColumnType(meta["type"]), _read_packed(meta["packed"], r), presence)
    if kind == "dict_string":
        return StringBlock(list(meta["dictionary"]), _read_packed(meta["codes"], r), presence)
    if kind == "bitset":
        return BoolBlock(BitSet(r.get(meta["bits"]), meta["size"]), presence)
    if kind == "range_pair":
        return RangeBlock(
            _read_packed(meta["mins"], r),
            _read_packed(meta["maxes"], r),
            BitSet(r.get(meta["openLo"]), meta["size"]),
            BitSet(r.get(meta["openHi"]), meta["size"]),
            presence,
        )
    raise ValueError(f"unknown block kind {kind!r}")


def read_container(data: bytes, schema: TableSchema | None = None):
    """Returns (Bucket, ImportStatistics). When a schema is given, its hash
    must match the one recorded at preprocessing time."""
    if data[:4] != MAGIC:
        raise ValueError("not an import container (bad magic)")
    (header_len,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    if header["version"] != VERSION:
        raise ValueError(f"unsupported container version {header['version']}")
    if schema is not None and header["schemaHash"] != schema_hash(schema):
        raise ValueError(
            f"schema mismatch for table {header['table']!r}: container was "
            "preprocessed against a different schema"
        )
    r = _SectionReader(data[8 + header_len :], header["sections"])

    starts = r.get(header["entityStarts"])
    entities = header["entities"]
    entity_index = {
        e: (int(starts[i]), int(starts[i + 1])) for i, e in enumerate(entities)
    }
    blocks = {
        c["name"]: _read_block(c["block"], header["rowCount"], r) for c in header["columns"]
    }
    bucket = Bucket(
        header["bucketId"],
        header["table"],
        header["importId"],
        blocks,
        entity_index,
        header["rowCount"],
    )
    stats = ImportStatistics.from_document(header["statistics"])
    return bucket, stats
