"""Compressed column blocks: bit-packed integers, dictionary-encoded strings,
bitsets and date-range pairs, each with an orthogonal presence bitset for nulls.

Single-row reads are constant-time bit extraction (plus a dictionary lookup
for strings); they never decompress the block. Whole-block decodes go through
``decode_all`` which bumps ``FULL_DECODE_COUNT`` so tests can assert that
seeks stay seek-shaped.
"""

from __future__ import annotations

import numpy as np

from . import _kernels as K
from .columns import ColumnType, int_to_value, value_to_int

FULL_DECODE_COUNT = 0


def _count_full_decode():
    global FULL_DECODE_COUNT
    FULL_DECODE_COUNT += 1


def reset_full_decode_count():
    global FULL_DECODE_COUNT
    FULL_DECODE_COUNT = 0


_U64_FULL = 0xFFFFFFFFFFFFFFFF


class BitSet:
    """Fixed-size bitset over little-endian uint64 words."""

    __slots__ = ("words", "size")

    def __init__(self, words: np.ndarray, size: int):
        self.words = words
        self.size = size

    @staticmethod
    def from_bools(bools) -> "BitSet":
        arr = np.asarray(bools, dtype=bool)
        return BitSet(K.bits_from_bools(arr), len(arr))

    def get(self, i: int) -> bool:
        return K.bit_get(self.words, i)

    def to_bools(self) -> np.ndarray:
        return K.bools_from_bits(self.words, self.size)

    @property
    def nbytes(self) -> int:
        return self.words.nbytes


class BitPackedInt:
    """Integers stored as (value - base) in ``width`` bits each.

    ``width`` is the minimum number of bits for the largest offset; a constant
    column packs to zero bits. Null rows pack the base (presence is tracked
    separately by the owning block).
    """

    __slots__ = ("base", "width", "words", "count")

    def __init__(self, base: int, width: int, words: np.ndarray, count: int):
        self.base = base
        self.width = width
        self.words = words
        self.count = count

    @staticmethod
    def encode(values: np.ndarray, present: np.ndarray) -> "BitPackedInt":
        """values: int64 array with arbitrary fill on null rows."""
        n = len(values)
        if n == 0 or not present.any():
            return BitPackedInt(0, 0, np.zeros(0, dtype=np.uint64), n)
        sel = values[present]
        base = int(sel.min())
        vrange = int(sel.max()) - base
        width = int(vrange).bit_length()
        offsets = np.where(present, values, base)
        # two's-complement subtraction is exact for any int64 base/value pair
        off_u64 = (offsets.astype(np.uint64) - np.uint64(base & _U64_FULL)) & np.uint64(_U64_FULL)
        return BitPackedInt(base, width, K.pack_bits(off_u64, width), n)

    def get(self, row: int) -> int:
        return self.base + int(K.unpack_one(self.words, self.width, row))

    def array(self, start: int, end: int) -> np.ndarray:
        """Decode rows [start, end) to int64 without touching other rows."""
        offs = K.unpack_range(self.words, self.width, start, end)
        return (offs + np.uint64(self.base & _U64_FULL)).astype(np.uint64).view(np.int64)

    @property
    def nbytes(self) -> int:
        return self.words.nbytes


class _Block:
    """Common surface of all column blocks."""

    type: ColumnType
    row_count: int
    presence: BitSet

    def _check_row(self, row: int):
        if not (0 <= row < self.row_count):
            raise IndexError(f"row {row} out of range [0, {self.row_count})")

    def present_array(self, start: int, end: int) -> np.ndarray:
        return self.presence.to_bools()[start:end]

    def read(self, row: int):
        raise NotImplementedError

    def decode_all(self) -> list:
        raise NotImplementedError

    @property
    def nbytes(self) -> int:
        raise NotImplementedError


class IntBlock(_Block):
    """INTEGER / DECIMAL / MONEY / DATE reduced to bit-packed integers."""

    def __init__(self, ctype: ColumnType, packed: BitPackedInt, presence: BitSet):
        self.type = ctype
        self.packed = packed
        self.presence = presence
        self.row_count = packed.count

    def read(self, row: int):
        self._check_row(row)
        if not self.presence.get(row):
            return None
        return int_to_value(self.packed.get(row), self.type)

    def ints(self, start: int, end: int) -> tuple[np.ndarray, np.ndarray]:
        return self.packed.array(start, end), self.present_array(start, end)

    def decode_all(self) -> list:
        _count_full_decode()
        vals, present = self.ints(0, self.row_count)
        return [int_to_value(int(v), self.type) if p else None for v, p in zip(vals, present)]

    @property
    def nbytes(self) -> int:
        return self.packed.nbytes + self.presence.nbytes


class StringBlock(_Block):
    type = ColumnType.STRING

    def __init__(self, dictionary: list[str], codes: BitPackedInt, presence: BitSet):
        self.dictionary = dictionary
        self.codes = codes
        self.presence = presence
        self.row_count = codes.count

    def read(self, row: int):
        self._check_row(row)
        if not self.presence.get(row):
            return None
        return self.dictionary[self.codes.get(row)]

    def code_array(self, start: int, end: int) -> tuple[np.ndarray, np.ndarray]:
        return self.codes.array(start, end), self.present_array(start, end)

    def decode_all(self) -> list:
        _count_full_decode()
        codes, present = self.code_array(0, self.row_count)
        return [self.dictionary[c] if p else None for c, p in zip(codes, present)]

    @property
    def dictionary_nbytes(self) -> int:
        return sum(len(s.encode("utf-8")) + 4 for s in self.dictionary)

    @property
    def nbytes(self) -> int:
        return self.codes.nbytes + self.presence.nbytes + self.dictionary_nbytes


class BoolBlock(_Block):
    type = ColumnType.BOOLEAN

    def __init__(self, bits: BitSet, presence: BitSet):
        self.bits = bits
        self.presence = presence
        self.row_count = bits.size

    def read(self, row: int):
        self._check_row(row)
        if not self.presence.get(row):
            return None
        return self.bits.get(row)

    def bool_array(self, start: int, end: int) -> tuple[np.ndarray, np.ndarray]:
        return self.bits.to_bools()[start:end], self.present_array(start, end)

    def decode_all(self) -> list:
        _count_full_decode()
        vals, present = self.bool_array(0, self.row_count)
        return [bool(v) if p else None for v, p in zip(vals, present)]

    @property
    def nbytes(self) -> int:
        return self.bits.nbytes + self.presence.nbytes


class RangeBlock(_Block):
    """DATE_RANGE as paired packed day numbers plus two openness bitsets."""

    type = ColumnType.DATE_RANGE

    def __init__(
        self,
        mins: BitPackedInt,
        maxes: BitPackedInt,
        open_lo: BitSet,
        open_hi: BitSet,
        presence: BitSet,
    ):
        self.mins = mins
        self.maxes = maxes
        self.open_lo = open_lo
        self.open_hi = open_hi
        self.presence = presence
        self.row_count = mins.count

    def read(self, row: int):
        self._check_row(row)
        if not self.presence.get(row):
            return None
        lo = None if self.open_lo.get(row) else int_to_value(self.mins.get(row), ColumnType.DATE)
        hi = None if self.open_hi.get(row) else int_to_value(self.maxes.get(row), ColumnType.DATE)
        return (lo, hi)

    def range_arrays(self, start: int, end: int):
        return (
            self.mins.array(start, end),
            self.maxes.array(start, end),
            self.open_lo.to_bools()[start:end],
            self.open_hi.to_bools()[start:end],
            self.present_array(start, end),
        )

    def decode_all(self) -> list:
        _count_full_decode()
        mins, maxes, olo, ohi, present = self.range_arrays(0, self.row_count)
        out = []
        for i in range(self.row_count):
            if not present[i]:
                out.append(None)
                continue
            lo = None if olo[i] else int_to_value(int(mins[i]), ColumnType.DATE)
            hi = None if ohi[i] else int_to_value(int(maxes[i]), ColumnType.DATE)
            out.append((lo, hi))
        return out

    @property
    def nbytes(self) -> int:
        return (
            self.mins.nbytes
            + self.maxes.nbytes
            + self.open_lo.nbytes
            + self.open_hi.nbytes
            + self.presence.nbytes
        )


def _presence_of(values) -> np.ndarray:
    return np.array([v is not None for v in values], dtype=bool)


def encode_column(values: list, ctype: ColumnType) -> _Block:
    """Encode one column of optional typed values into its compressed block."""
    present = _presence_of(values)
    n = len(values)

    if ctype in (ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.MONEY, ColumnType.DATE):
        ints = np.zeros(n, dtype=np.int64)
        for i, v in enumerate(values):
            if v is not None:
                ints[i] = value_to_int(v, ctype)
        return IntBlock(ctype, BitPackedInt.encode(ints, present), BitSet.from_bools(present))

    if ctype == ColumnType.STRING:
        for i, v in enumerate(values):
            if v is not None and not isinstance(v, str):
                raise TypeError(f"row {i}: STRING value expected, got {type(v).__name__}")
        codes = np.zeros(n, dtype=np.int64)
        if present.any():
            sel = np.array([v for v in values if v is not None], dtype=object)
            uniq, inverse = np.unique(sel, return_inverse=True)
            codes[present] = inverse
            dictionary = [str(s) for s in uniq]
        else:
            dictionary = []
        return StringBlock(
            dictionary, BitPackedInt.encode(codes, present), BitSet.from_bools(present)
        )

    if ctype == ColumnType.BOOLEAN:
        bools = np.zeros(n, dtype=bool)
        for i, v in enumerate(values):
            if v is None:
                continue
            if not isinstance(v, (bool, np.bool_)):
                raise TypeError(f"row {i}: BOOLEAN value expected, got {type(v).__name__}")
            bools[i] = bool(v)
        return BoolBlock(BitSet.from_bools(bools), BitSet.from_bools(present))

    if ctype == ColumnType.DATE_RANGE:
        mins = np.zeros(n, dtype=np.int64)
        maxes = np.zeros(n, dtype=np.int64)
        open_lo = np.zeros(n, dtype=bool)
        open_hi = np.zeros(n, dtype=bool)
        min_present = np.zeros(n, dtype=bool)
        max_present = np.zeros(n, dtype=bool)
        for i, v in enumerate(values):
            if v is None:
                continue
            if not (isinstance(v, tuple) and len(v) == 2):
                raise TypeError(f"row {i}: DATE_RANGE value expected, got {type(v).__name__}")
            lo, hi = v
            if lo is None:
                open_lo[i] = True
            else:
                mins[i] = value_to_int(lo, ColumnType.DATE)
                min_present[i] = True
            if hi is None:
                open_hi[i] = True
            else:
                maxes[i] = value_to_int(hi, ColumnType.DATE)
                max_present[i] = True
            if lo is not None and hi is not None and mins[i] > maxes[i]:
                raise ValueError(f"row {i}: DATE_RANGE min {lo} > max {hi}")
        return RangeBlock(
            BitPackedInt.encode(mins, min_present),
            BitPackedInt.encode(maxes, max_present),
            BitSet.from_bools(open_lo),
            BitSet.from_bools(open_hi),
            BitSet.from_bools(present),
        )

    raise TypeError(f"unsupported column type {ctype}")


def read_value(block: _Block, row: int):
    """Constant-time read of one row; None for nulls."""
    return block.read(row)
