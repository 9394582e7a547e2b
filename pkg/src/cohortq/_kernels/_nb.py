"""Numba JIT versions of the hot kernels. Same contracts as ``_np``."""

import numpy as np
from numba import njit

U64 = np.uint64

# cache=False: the on-disk cache has produced corrupted segmented-reduction
# results when several kernels from this module were compiled across
# processes; per-process compilation of these small kernels is cheap.
jit = njit(cache=False, nogil=True)


@jit
def pack_bits(offsets, width):
    n = len(offsets)
    words = np.zeros((n * width + 63) // 64, dtype=np.uint64)
    if width == 0 or n == 0:
        return words
    for i in range(n):
        v = np.uint64(offsets[i])
        off = i * width
        lo = off >> 6
        sh = off & 63
        words[lo] |= v << np.uint64(sh)
        if sh + width > 64:
            words[lo + 1] |= v >> np.uint64(64 - sh)
    return words


@jit
def unpack_one(words, width, row):
    if width == 0:
        return np.uint64(0)
    off = row * width
    lo = off >> 6
    sh = off & 63
    v = words[lo] >> np.uint64(sh)
    if sh + width > 64:
        v |= words[lo + 1] << np.uint64(64 - sh)
    if width < 64:
        v &= np.uint64((1 << width) - 1)
    return v


@jit
def unpack_range(words, width, start, end):
    n = end - start
    out = np.zeros(max(n, 0), dtype=np.uint64)
    if width == 0 or n <= 0:
        return out
    mask = np.uint64(0xFFFFFFFFFFFFFFFF) if width >= 64 else np.uint64((1 << width) - 1)
    for i in range(n):
        off = (start + i) * width
        lo = off >> 6
        sh = off & 63
        v = words[lo] >> np.uint64(sh)
        if sh + width > 64:
            v |= words[lo + 1] << np.uint64(64 - sh)
        out[i] = v & mask
    return out


@jit
def quarter_index(days):
    out = np.empty(len(days), dtype=np.int64)
    for i in range(len(days)):
        z = days[i] + 719468
        era = z // 146097
        doe = z - era * 146097
        yoe = (doe - doe // 1460 + doe // 36524 - doe // 146096) // 365
        y = yoe + era * 400
        doy = doe - (365 * yoe + yoe // 4 - yoe // 100)
        mp = (5 * doy + 2) // 153
        m = mp + 3 if mp < 10 else mp - 9
        if m <= 2:
            y += 1
        out[i] = y * 4 + (m - 1) // 3
    return out


@jit
def seg_count(mask, starts, ends):
    out = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        c = 0
        for j in range(starts[i], ends[i]):
            if mask[j]:
                c += 1
        out[i] = c
    return out


@jit
def seg_distinct(codes, mask, starts, ends):
    out = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        s, e = starts[i], ends[i]
        n = 0
        for j in range(s, e):
            if mask[j]:
                n += 1
        if n == 0:
            continue
        buf = np.empty(n, dtype=codes.dtype)
        k = 0
        for j in range(s, e):
            if mask[j]:
                buf[k] = codes[j]
                k += 1
        buf.sort()
        d = 1
        for j in range(1, n):
            if buf[j] != buf[j - 1]:
                d += 1
        out[i] = d
    return out


@jit
def seg_interval_cover(lo, hi, mask, starts, ends):
    out = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        s, e = starts[i], ends[i]
        n = 0
        for j in range(s, e):
            if mask[j]:
                n += 1
        if n == 0:
            continue
        ls = np.empty(n, dtype=lo.dtype)
        hs = np.empty(n, dtype=hi.dtype)
        k = 0
        for j in range(s, e):
            if mask[j]:
                ls[k] = lo[j]
                hs[k] = hi[j]
                k += 1
        order = np.argsort(ls)
        total = 0
        cur_lo = ls[order[0]]
        cur_hi = hs[order[0]]
        for j in range(1, n):
            a = ls[order[j]]
            b = hs[order[j]]
            if a > cur_hi + 1:
                total += cur_hi - cur_lo + 1
                cur_lo, cur_hi = a, b
            elif b > cur_hi:
                cur_hi = b
        total += cur_hi - cur_lo + 1
        out[i] = total
    return out


@jit
def seg_coalesce(lo, hi, mask, starts, ends, out_lo, out_hi, out_offsets):
    counts = np.zeros(len(starts), dtype=np.int64)
    for i in range(len(starts)):
        s, e = starts[i], ends[i]
        n = 0
        for j in range(s, e):
            if mask[j]:
                n += 1
        if n == 0:
            continue
        ls = np.empty(n, dtype=lo.dtype)
        hs = np.empty(n, dtype=hi.dtype)
        k = 0
        for j in range(s, e):
            if mask[j]:
                ls[k] = lo[j]
                hs[k] = hi[j]
                k += 1
        order = np.argsort(ls)
        w = out_offsets[i]
        cur_lo = ls[order[0]]
        cur_hi = hs[order[0]]
        m = 0
        for j in range(1, n):
            a = ls[order[j]]
            b = hs[order[j]]
            if a > cur_hi + 1:
                out_lo[w + m] = cur_lo
                out_hi[w + m] = cur_hi
                m += 1
                cur_lo, cur_hi = a, b
            elif b > cur_hi:
                cur_hi = b
        out_lo[w + m] = cur_lo
        out_hi[w + m] = cur_hi
        counts[i] = m + 1
    return counts
