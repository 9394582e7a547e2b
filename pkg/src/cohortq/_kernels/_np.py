"""Pure-numpy reference implementations of the hot kernels.

These are the fallback path selected with COHORTQ_NUMBA=0 and the ground
truth the numba versions are benchmarked and tested against.
"""

import numpy as np

U64 = np.uint64
FULL_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _mask(width: int) -> np.uint64:
    if width >= 64:
        return FULL_MASK
    return np.uint64((1 << width) - 1)


def words_needed(count: int, width: int) -> int:
    return (count * width + 63) // 64


def pack_bits(offsets: np.ndarray, width: int) -> np.ndarray:
    """Pack unsigned offsets (< 2**width) into a little-endian bit buffer."""
    n = len(offsets)
    words = np.zeros(words_needed(n, width), dtype=U64)
    if width == 0 or n == 0:
        return words
    vals = offsets.astype(U64)
    off = np.arange(n, dtype=U64) * U64(width)
    lo = (off >> U64(6)).astype(np.int64)
    sh = off & U64(63)
    np.bitwise_or.at(words, lo, vals << sh)
    spill = (sh.astype(np.int64) + width) > 64
    if spill.any():
        # spill implies sh >= 1, so 64 - sh is a valid shift count
        np.bitwise_or.at(words, lo[spill] + 1, vals[spill] >> (U64(64) - sh[spill]))
    return words


def unpack_one(words: np.ndarray, width: int, row: int) -> int:
    if width == 0:
        return 0
    off = row * width
    lo = off >> 6
    sh = off & 63
    v = int(words[lo]) >> sh
    if sh + width > 64:
        v |= int(words[lo + 1]) << (64 - sh)
    return v & ((1 << width) - 1)


def unpack_range(words: np.ndarray, width: int, start: int, end: int) -> np.ndarray:
    n = end - start
    if width == 0 or n <= 0:
        return np.zeros(max(n, 0), dtype=U64)
    idx = np.arange(start, end, dtype=U64)
    off = idx * U64(width)
    lo = (off >> U64(6)).astype(np.int64)
    sh = off & U64(63)
    v = words[lo] >> sh
    spill = (sh.astype(np.int64) + width) > 64
    hi_idx = np.minimum(lo + 1, len(words) - 1)
    hi_sh = (U64(64) - sh) & U64(63)  # dead lanes masked below; keeps shifts in range
    v = v | np.where(spill, words[hi_idx] << hi_sh, U64(0))
    return v & _mask(width)


def bits_from_bools(bools: np.ndarray) -> np.ndarray:
    n = len(bools)
    packed = np.packbits(bools.astype(np.uint8), bitorder="little")
    words = np.zeros(words_needed(n, 1) * 8, dtype=np.uint8)
    words[: len(packed)] = packed
    return words.view(U64)


def bools_from_bits(words: np.ndarray, count: int) -> np.ndarray:
    bits = np.unpackbits(words.view(np.uint8), bitorder="little", count=count)
    return bits.astype(bool)


def bit_get(words: np.ndarray, row: int) -> bool:
    return bool((int(words[row >> 6]) >> (row & 63)) & 1)


def quarter_index(days: np.ndarray) -> np.ndarray:
    """Calendar quarter index (year*4 + quarter-1) from days since 1970-01-01.

    Civil-from-days with floor division, so negative days (pre-1970) work."""
    z = days.astype(np.int64) + 719468
    era = z // 146097
    doe = z - era * 146097
    yoe = (doe - doe // 1460 + doe // 36524 - doe // 146096) // 365
    y = yoe + era * 400
    doy = doe - (365 * yoe + yoe // 4 - yoe // 100)
    mp = (5 * doy + 2) // 153
    m = mp + np.where(mp < 10, 3, -9)
    y = y + (m <= 2)
    return y * 4 + (m - 1) // 3


def seg_count(mask: np.ndarray, starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    c = np.concatenate([[0], np.cumsum(mask.astype(np.int64))])
    return c[ends] - c[starts]


def seg_distinct(
    codes: np.ndarray, mask: np.ndarray, starts: np.ndarray, ends: np.ndarray
) -> np.ndarray:
    out = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        s, e = starts[i], ends[i]
        sel = codes[s:e][mask[s:e]]
        out[i] = len(np.unique(sel))
    return out


def seg_interval_cover(
    lo: np.ndarray, hi: np.ndarray, mask: np.ndarray, starts: np.ndarray, ends: np.ndarray
) -> np.ndarray:
    """Per segment: number of distinct integers covered by the union of [lo,hi]."""
    out = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        s, e = starts[i], ends[i]
        m = mask[s:e]
        if not m.any():
            continue
        ls, hs = lo[s:e][m], hi[s:e][m]
        order = np.argsort(ls, kind="stable")
        ls, hs = ls[order], hs[order]
        total = 0
        cur_lo, cur_hi = ls[0], hs[0]
        for j in range(1, len(ls)):
            if ls[j] > cur_hi + 1:
                total += cur_hi - cur_lo + 1
                cur_lo, cur_hi = ls[j], hs[j]
            elif hs[j] > cur_hi:
                cur_hi = hs[j]
        total += cur_hi - cur_lo + 1
        out[i] = total
    return out


def seg_coalesce(
    lo: np.ndarray,
    hi: np.ndarray,
    mask: np.ndarray,
    starts: np.ndarray,
    ends: np.ndarray,
    out_lo: np.ndarray,
    out_hi: np.ndarray,
    out_offsets: np.ndarray,
) -> np.ndarray:
    """Per segment: coalesce masked [lo,hi] ranges (sorted, merged, adjacency-joined).

    Ranges for segment i are written at out_offsets[i]; returns per-segment counts.
    """
    counts = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        s, e = starts[i], ends[i]
        m = mask[s:e]
        if not m.any():
            continue
        ls, hs = lo[s:e][m], hi[s:e][m]
        order = np.argsort(ls, kind="stable")
        ls, hs = ls[order], hs[order]
        w = out_offsets[i]
        cur_lo, cur_hi = ls[0], hs[0]
        k = 0
        for j in range(1, len(ls)):
            if ls[j] > cur_hi + 1:
                out_lo[w + k] = cur_lo
                out_hi[w + k] = cur_hi
                k += 1
                cur_lo, cur_hi = ls[j], hs[j]
            elif hs[j] > cur_hi:
                cur_hi = hs[j]
        out_lo[w + k] = cur_lo
        out_hi[w + k] = cur_hi
        counts[i] = k + 1
    return counts
