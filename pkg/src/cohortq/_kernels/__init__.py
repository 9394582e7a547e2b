"""Hot numeric kernels: bit packing and per-entity segmented aggregation.

Two interchangeable backends exist. The numba backend (``@njit`` with
``nogil=True``, so the worker thread pool actually scales) is the default
whenever numba imports cleanly; set ``COHORTQ_NUMBA=0`` to force the
pure-numpy fallback. ``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _np

_flag = os.environ.get("COHORTQ_NUMBA", "1").strip().lower()
_want_numba = _flag not in ("0", "false", "off", "no")

BACKEND = "numpy"
if _want_numba:
    try:
        from . import _nb

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay usable
        BACKEND = "numpy"

if BACKEND == "numba":
    pack_bits = _nb.pack_bits
    unpack_one = _nb.unpack_one
    unpack_range = _nb.unpack_range
    quarter_index = _nb.quarter_index
    seg_count = _nb.seg_count
    seg_distinct = _nb.seg_distinct
    seg_interval_cover = _nb.seg_interval_cover
    seg_coalesce = _nb.seg_coalesce
else:
    pack_bits = _np.pack_bits
    unpack_one = _np.unpack_one
    unpack_range = _np.unpack_range
    quarter_index = _np.quarter_index
    seg_count = _np.seg_count
    seg_distinct = _np.seg_distinct
    seg_interval_cover = _np.seg_interval_cover
    seg_coalesce = _np.seg_coalesce

# bitset helpers are cheap numpy calls either way
words_needed = _np.words_needed
bits_from_bools = _np.bits_from_bools
bools_from_bits = _np.bools_from_bits
bit_get = _np.bit_get

__all__ = [
    "BACKEND",
    "pack_bits",
    "unpack_one",
    "unpack_range",
    "quarter_index",
    "seg_count",
    "seg_distinct",
    "seg_interval_cover",
    "seg_coalesce",
    "words_needed",
    "bits_from_bools",
    "bools_from_bits",
    "bit_get",
]
