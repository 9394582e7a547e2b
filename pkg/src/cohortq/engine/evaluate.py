"""Per-entity query evaluation over compressed buckets.

The hot pipeline is columnar: every (scan, import) pair computes an
event-match mask and clipped validity ranges for the whole bucket at once,
then per-entity satisfaction is reduced with the segmented kernels. The
slower per-entity path (used for secondary-key grouping, tables split over
several imports, and the single-entity API) shares the same masks, so both
paths agree by construction on the event-level predicates.

Result lines are only materialized for entities that satisfy the root, with
DateSets combined bottom-up: concept nodes union their satisfied table
entries, AND intersects, OR unions, NEGATION yields the enclosing restriction
window (or nothing), and date restrictions mask their child.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels as K
from ..columns import ColumnType, int_to_value
from ..concepts import canonical_str
from ..dateset import EMPTY, DateSet
from ..dateset import _NEG as NEG_INF
from ..dateset import _POS as POS_INF
from ..store import DataStore, LoadedImport
from ..bucket import entity_bucket
from .plan import AggFilter, ConnectorScan, PBool, PConcept, PNegation, PRestriction, PSaved
from .plan import QueryPlan, scan_may_hit, window_empty


@dataclass
class ResultLine:
    entity: str
    secondary: str | None
    dates: DateSet
    values: list

    def to_document(self):
        vals = []
        for v in self.values:
            if isinstance(v, DateSet):
                vals.append({"ds": v.to_document()})
            else:
                vals.append(v)
        return {
            "entity": self.entity,
            "secondary": self.secondary,
            "dates": self.dates.to_document(),
            "values": vals,
        }

    @staticmethod
    def from_document(doc) -> "ResultLine":
        vals = []
        for v in doc["values"]:
            if isinstance(v, dict) and "ds" in v:
                vals.append(DateSet.from_document(v["ds"]))
            else:
                vals.append(v)
        return ResultLine(
            doc["entity"], doc.get("secondary"), DateSet.from_document(doc["dates"]), vals
        )

    def key(self):
        """Canonical comparison key (used by tests for multiset equality)."""
        vals = tuple(
            tuple(v) if isinstance(v, list) else (tuple(v.ranges) if isinstance(v, DateSet) else v)
            for v in self.values
        )
        return (self.entity, self.secondary, tuple(self.dates.ranges), vals)


@dataclass
class ScanArrays:
    """Whole-bucket event arrays for one (scan, import) pair."""

    imp: LoadedImport
    mask: np.ndarray  # event matches all event-level predicates
    contrib: np.ndarray  # mask & has validity dates (clipped by the window)
    vlo: np.ndarray  # clipped validity, sealed ints (open sides = +-inf sentinels)
    vhi: np.ndarray


def _quarter_index(days: np.ndarray) -> np.ndarray:
    return K.quarter_index(np.ascontiguousarray(days, dtype=np.int64))


class EvalContext:
    """Caches decoded column arrays and scan masks for one query execution."""

    def __init__(self, plan: QueryPlan, store: DataStore, bucket_count: int, no_skip=False):
        self.plan = plan
        self.store = store
        self.bucket_count = bucket_count
        self.no_skip = no_skip
        self._caches: dict[int, dict] = {}  # bucket id -> cache dict
        self.counters = {
            "buckets": 0,
            "entities": 0,
            "imports_scanned": 0,
            "imports_skipped": 0,
            "lines": 0,
        }

    def _bucket_cache(self, bucket_id: int) -> dict:
        cache = self._caches.get(bucket_id)
        if cache is None:
            cache = self._caches.setdefault(bucket_id, {})
        return cache

    def purge_bucket(self, bucket_id: int):
        """Drop decoded arrays once a bucket's lines are materialized."""
        self._caches.pop(bucket_id, None)

    # -- decoded column caches ---------------------------------------------

    def _key(self, imp: LoadedImport, column: str):
        return (imp.import_id, imp.table, column)

    def str_codes(self, imp: LoadedImport, column: str):
        cache = self._bucket_cache(imp.bucket_id)
        key = ("s",) + self._key(imp, column)
        if key not in cache:
            block = imp.bucket.blocks[column]
            codes, present = block.code_array(0, block.row_count)
            cache[key] = (codes, present, block.dictionary)
        return cache[key]

    def int_vals(self, imp: LoadedImport, column: str):
        cache = self._bucket_cache(imp.bucket_id)
        key = ("i",) + self._key(imp, column)
        if key not in cache:
            block = imp.bucket.blocks[column]
            cache[key] = block.ints(0, block.row_count)
        return cache[key]

    def bool_vals(self, imp: LoadedImport, column: str):
        cache = self._bucket_cache(imp.bucket_id)
        key = ("b",) + self._key(imp, column)
        if key not in cache:
            block = imp.bucket.blocks[column]
            cache[key] = block.bool_array(0, block.row_count)
        return cache[key]

    def range_vals(self, imp: LoadedImport, column: str):
        """Sealed (vlo, vhi, present) for a DATE_RANGE column."""
        cache = self._bucket_cache(imp.bucket_id)
        key = ("r",) + self._key(imp, column)
        if key not in cache:
            block = imp.bucket.blocks[column]
            mins, maxes, olo, ohi, present = block.range_arrays(0, block.row_count)
            vlo = np.where(olo, NEG_INF, mins)
            vhi = np.where(ohi, POS_INF, maxes)
            cache[key] = (vlo, vhi, present)
        return cache[key]

    def validity(self, imp: LoadedImport, column: str, ctype: ColumnType):
        if ctype == ColumnType.DATE:
            vals, present = self.int_vals(imp, column)
            return vals, vals, present
        return self.range_vals(imp, column)

    def quarters(self, imp: LoadedImport, column: str):
        """Per row: covered quarter interval (qlo, qhi, valid)."""
        cache = self._bucket_cache(imp.bucket_id)
        key = ("q",) + self._key(imp, column)
        if key not in cache:
            block = imp.bucket.blocks[column]
            if block.type == ColumnType.DATE:
                vals, present = self.int_vals(imp, column)
                q = _quarter_index(vals)
                cache[key] = (q, q, present)
            else:
                mins, maxes, olo, ohi, present = block.range_arrays(0, block.row_count)
                qmin = _quarter_index(mins)
                qmax = _quarter_index(maxes)
                qlo = np.where(olo, qmax, qmin)
                qhi = np.where(ohi, qmin, qmax)
                valid = present & ~(olo & ohi)
                cache[key] = (qlo, qhi, valid)
        return cache[key]

    def cell_values(self, imp: LoadedImport, column: str):
        """Python value per row (lazy, cached); used by the per-entity paths."""
        cache = self._bucket_cache(imp.bucket_id)
        key = ("v",) + self._key(imp, column)
        if key not in cache:
            block = imp.bucket.blocks[column]
            if block.type == ColumnType.STRING:
                codes, present, dictionary = self.str_codes(imp, column)
                vals = [dictionary[c] if p else None for c, p in zip(codes, present)]
            elif block.type in (
                ColumnType.INTEGER,
                ColumnType.DECIMAL,
                ColumnType.MONEY,
                ColumnType.DATE,
            ):
                ints, present = self.int_vals(imp, column)
                vals = [
                    int_to_value(int(v), block.type) if p else None
                    for v, p in zip(ints, present)
                ]
            elif block.type == ColumnType.BOOLEAN:
                bools, present = self.bool_vals(imp, column)
                vals = [bool(v) if p else None for v, p in zip(bools, present)]
            else:
                vals = [block.read(i) for i in range(block.row_count)]
            cache[key] = vals
        return cache[key]

    def aux_rows(self, imp: LoadedImport, concept: str):
        """Aux-column value dicts per row, for conditional concept codes."""
        cache = self._bucket_cache(imp.bucket_id)
        key = ("aux", imp.import_id, concept)
        if key not in cache:
            tree = self.store.registry.concepts[concept]
            schema = self.store.registry.schemas[imp.table]
            cols = [c for c in sorted(tree.aux_columns) if schema.has_column(c)]
            per_col = {c: self.cell_values(imp, c) for c in cols}
            cache[key] = (cols, per_col)
        return cache[key]

    # -- scan arrays ---------------------------------------------------------

    def scan_arrays(self, scan: ConnectorScan, imp: LoadedImport) -> ScanArrays:
        cache = self._bucket_cache(imp.bucket_id)
        key = ("scan", scan.index, imp.import_id)
        arrays = cache.get(key)
        if arrays is None:
            arrays = _compute_scan_arrays(self, scan, imp)
            cache[key] = arrays
        return arrays


def _compute_scan_arrays(ctx: EvalContext, scan: ConnectorScan, imp: LoadedImport) -> ScanArrays:
    n = imp.bucket.row_count
    if n == 0 or window_empty(scan.window):
        z = np.zeros(n, dtype=bool)
        zi = np.zeros(n, dtype=np.int64)
        return ScanArrays(imp, z, z, zi, zi)

    codes, present, dictionary = ctx.str_codes(imp, scan.code_column)
    assignment = imp.assignments[(scan.concept, scan.code_column)]
    if len(dictionary):
        allowed = assignment.allowed_mask(scan.intervals)
        mask = present & allowed[codes]
        cond = assignment.conditional
        if cond.any():
            cond_rows = np.nonzero(present & cond[codes])[0]
            if len(cond_rows):
                mask[cond_rows] = _resolve_conditional_rows(
                    ctx, scan, imp, assignment, codes, cond_rows
                )
    else:
        mask = np.zeros(n, dtype=bool)

    for col, keys in scan.key_filters:
        kcodes, kpresent, kdict = ctx.str_codes(imp, col)
        if not len(kdict):
            mask &= False
            continue
        kallowed = np.fromiter((d in keys for d in kdict), dtype=bool, count=len(kdict))
        mask &= kpresent & kallowed[kcodes]

    for col, lo, hi in scan.range_filters:
        vals, p = ctx.int_vals(imp, col)
        mask &= p
        if lo is not None:
            mask &= vals >= lo
        if hi is not None:
            mask &= vals <= hi

    vlo, vhi, vvalid = ctx.validity(imp, scan.validity_column, scan.validity_type)
    return _finish_scan_arrays(scan, imp, mask, vlo, vhi, vvalid)


def _resolve_conditional_rows(ctx, scan, imp, assignment, codes, cond_rows) -> np.ndarray:
    """Concept membership for rows whose code resolution depends on auxiliary
    event columns. Rows are grouped by (code, aux values) so each distinct
    combination resolves only once."""
    tree = ctx.store.registry.concepts[scan.concept]
    schema = ctx.store.registry.schemas[imp.table]
    lo_arr = tree.dfs_lo
    aux_cols = [c for c in sorted(tree.aux_columns) if schema.has_column(c)]
    str_aux = [
        c for c in aux_cols if imp.bucket.blocks[c].type == ColumnType.STRING
    ]

    def in_intervals(node_idx) -> bool:
        if node_idx is None:
            return False
        lo = int(lo_arr[node_idx])
        return any(a <= lo <= b for a, b in scan.intervals)

    if len(str_aux) == len(aux_cols):
        # mixed-radix combo over the dictionary codes of code + aux columns
        combo = codes[cond_rows].astype(np.int64)
        for c in aux_cols:
            acodes, apresent, adict = ctx.str_codes(imp, c)
            radix = len(adict) + 1
            combo = combo * radix + np.where(apresent[cond_rows], acodes[cond_rows] + 1, 0)
        uniq, first, inverse = np.unique(combo, return_index=True, return_inverse=True)
        lut = np.zeros(len(uniq), dtype=bool)
        for k, rep_pos in enumerate(first):
            row = int(cond_rows[rep_pos])
            aux = {}
            for c in aux_cols:
                acodes, apresent, adict = ctx.str_codes(imp, c)
                aux[c] = adict[int(acodes[row])] if apresent[row] else None
            lut[k] = in_intervals(
                assignment.resolve_event(int(codes[row]), aux)
            )
        return lut[inverse]

    cols, per_col = ctx.aux_rows(imp, scan.concept)
    out = np.zeros(len(cond_rows), dtype=bool)
    for i, r in enumerate(cond_rows):
        aux = {c: per_col[c][int(r)] for c in cols}
        out[i] = in_intervals(assignment.resolve_event(int(codes[int(r)]), aux))
    return out


def _finish_scan_arrays(scan, imp, mask, vlo, vhi, vvalid) -> ScanArrays:
    if scan.window is not None:
        wlo = NEG_INF if scan.window[0] is None else scan.window[0]
        whi = POS_INF if scan.window[1] is None else scan.window[1]
        cvlo = np.maximum(vlo, wlo)
        cvhi = np.minimum(vhi, whi)
        mask = mask & vvalid & (cvlo <= cvhi)
        return ScanArrays(imp, mask, mask, cvlo, cvhi)
    contrib = mask & vvalid
    return ScanArrays(imp, mask, contrib, np.asarray(vlo), np.asarray(vhi))


# ---------------------------------------------------------------------------
# Aggregation values


def _agg_codes(ctx: EvalContext, imp: LoadedImport, column: str):
    """Int codes + presence for distinct counting within one import."""
    block = imp.bucket.blocks[column]
    if block.type == ColumnType.STRING:
        codes, present, _ = ctx.str_codes(imp, column)
        return codes, present
    if block.type == ColumnType.BOOLEAN:
        bools, present = ctx.bool_vals(imp, column)
        return bools.astype(np.int64), present
    ints, present = ctx.int_vals(imp, column)
    return ints, present


def _agg_value_array(
    ctx: EvalContext, imp: LoadedImport, mask: np.ndarray, kind: str, column: str, distinct: bool
) -> np.ndarray:
    """Per-entity aggregate over one import (entities in bucket order)."""
    starts, ends = imp.bucket.starts, imp.bucket.ends
    if kind == "COUNT":
        codes, present = _agg_codes(ctx, imp, column)
        m = mask & present
        if distinct:
            return K.seg_distinct(codes, m, starts, ends)
        return K.seg_count(m, starts, ends)
    qlo, qhi, qvalid = ctx.quarters(imp, column)
    return K.seg_interval_cover(qlo, qhi, mask & qvalid, starts, ends)


def _entity_agg_value(
    ctx: EvalContext,
    scan: ConnectorScan,
    imps: list[LoadedImport],
    entity: str,
    kind: str,
    column: str,
    distinct: bool,
    extra_mask=None,
) -> int:
    """Per-entity aggregate merged across imports (the slow but general path)."""
    if kind == "COUNT" and not distinct:
        total = 0
        for imp in imps:
            rng = imp.bucket.entity_range(entity)
            if rng is None:
                continue
            s, e = rng
            arrays = ctx.scan_arrays(scan, imp)
            _, present = _agg_codes(ctx, imp, column)
            m = arrays.mask[s:e] & present[s:e]
            if extra_mask is not None:
                m = m & extra_mask[(imp.import_id, imp.bucket_id)][s:e]
            total += int(m.sum())
        return total
    if kind == "COUNT":
        seen = set()
        for imp in imps:
            rng = imp.bucket.entity_range(entity)
            if rng is None:
                continue
            s, e = rng
            arrays = ctx.scan_arrays(scan, imp)
            m = arrays.mask[s:e]
            if extra_mask is not None:
                m = m & extra_mask[(imp.import_id, imp.bucket_id)][s:e]
            cells = ctx.cell_values(imp, column)
            for i in np.nonzero(m)[0]:
                v = cells[s + int(i)]
                if v is not None:
                    seen.add(canonical_str(v))
        return len(seen)
    # COUNT_QUARTERS
    intervals = []
    for imp in imps:
        rng = imp.bucket.entity_range(entity)
        if rng is None:
            continue
        s, e = rng
        arrays = ctx.scan_arrays(scan, imp)
        qlo, qhi, qvalid = ctx.quarters(imp, column)
        m = arrays.mask[s:e] & qvalid[s:e]
        if extra_mask is not None:
            m = m & extra_mask[(imp.import_id, imp.bucket_id)][s:e]
        for i in np.nonzero(m)[0]:
            intervals.append((int(qlo[s + int(i)]), int(qhi[s + int(i)])))
    return _cover(intervals)


def _cover(intervals: list[tuple[int, int]]) -> int:
    if not intervals:
        return 0
    intervals.sort()
    total = 0
    cur_lo, cur_hi = intervals[0]
    for lo, hi in intervals[1:]:
        if lo > cur_hi + 1:
            total += cur_hi - cur_lo + 1
            cur_lo, cur_hi = lo, hi
        elif hi > cur_hi:
            cur_hi = hi
    return total + (cur_hi - cur_lo + 1)


def _scan_satisfied_entity(
    ctx: EvalContext, scan: ConnectorScan, imps: list[LoadedImport], entity: str, extra_mask=None
) -> bool:
    matched = 0
    for imp in imps:
        rng = imp.bucket.entity_range(entity)
        if rng is None:
            continue
        s, e = rng
        m = ctx.scan_arrays(scan, imp).mask[s:e]
        if extra_mask is not None:
            m = m & extra_mask[(imp.import_id, imp.bucket_id)][s:e]
        matched += int(m.sum())
    if matched == 0:
        return False
    for agg in scan.agg_filters:
        v = _entity_agg_value(
            ctx, scan, imps, entity, agg.kind, agg.column, agg.distinct, extra_mask
        )
        if v < agg.lo or (agg.hi is not None and v > agg.hi):
            return False
    return True


# ---------------------------------------------------------------------------
# Bucket evaluation


class _BucketEval:
    """Evaluation state for one bucket: universe, per-scan satisfaction."""

    def __init__(self, ctx: EvalContext, bucket_id: int):
        self.ctx = ctx
        self.bucket_id = bucket_id
        plan, store = ctx.plan, ctx.store
        imports = store.by_bucket.get(bucket_id, [])

        # pruning: which imports can contribute to which scan
        self.relevant: dict[int, list[LoadedImport]] = {s.index: [] for s in plan.scans}
        scanned: set = set()
        for imp in imports:
            useful = False
            for scan in plan.scans:
                if ctx.no_skip:
                    may = imp.table == scan.table and not window_empty(scan.window)
                else:
                    may = scan_may_hit(imp.stats, imp.table, scan)
                if may:
                    self.relevant[scan.index].append(imp)
                    useful = True
            if useful:
                scanned.add((imp.import_id, imp.table))
            elif imp.table in plan.tables or not plan.tables:
                ctx.counters["imports_skipped"] += 1
        ctx.counters["imports_scanned"] += len(scanned)

        # entity universe; when one import covers it, reuse its entity list
        sole = None
        if plan.needs_scan_hit:
            contributing = {
                imp for scan in plan.scans for imp in self.relevant[scan.index]
            }
            if len(contributing) == 1:
                sole = next(iter(contributing))
        if sole is not None:
            self.universe: list[str] = sole.bucket.entities
            self._sole_import = sole
            self._uidx = None
        else:
            seen: dict[str, bool] = {}
            if plan.needs_scan_hit:
                for scan in plan.scans:
                    for imp in self.relevant[scan.index]:
                        for e in imp.bucket.entities:
                            seen[e] = True
            else:
                for imp in imports:
                    for e in imp.bucket.entities:
                        seen[e] = True
                for e in sorted(plan.membership_entities()):
                    if entity_bucket(e, ctx.bucket_count) == bucket_id:
                        seen.setdefault(e, True)
            self.universe = list(seen.keys())
            self._sole_import = None
            self._uidx = {e: i for i, e in enumerate(self.universe)}
        self._positions: dict = {}
        self._inverse: dict = {}
        self._scan_sat: dict[int, np.ndarray] = {}
        self._node_sat: dict[int, np.ndarray] = {}
        self._select_arrays: dict = {}
        self._date_buffers: dict = {}

    @property
    def uidx(self) -> dict:
        if self._uidx is None:
            self._uidx = {e: i for i, e in enumerate(self.universe)}
        return self._uidx

    def positions(self, imp: LoadedImport) -> np.ndarray:
        key = (imp.import_id, imp.table)
        pos = self._positions.get(key)
        if pos is None:
            if imp is self._sole_import:
                pos = np.arange(len(self.universe), dtype=np.int64)
            else:
                pos = np.fromiter(
                    (self.uidx[e] for e in imp.bucket.entities),
                    dtype=np.int64,
                    count=len(imp.bucket.entities),
                )
            self._positions[key] = pos
        return pos

    def inverse_positions(self, imp: LoadedImport) -> np.ndarray:
        """universe index -> entity index within the import (-1 if absent)."""
        if imp is self._sole_import:
            return self.positions(imp)  # identity either way
        key = (imp.import_id, imp.table)
        inv = self._inverse.get(key)
        if inv is None:
            inv = np.full(len(self.universe), -1, dtype=np.int64)
            inv[self.positions(imp)] = np.arange(len(imp.bucket.entities), dtype=np.int64)
            self._inverse[key] = inv
        return inv

    def fast_import(self, scan: ConnectorScan) -> LoadedImport | None:
        """The single import backing a scan in this bucket (the vectorized
        materialization path); None when the table is split across imports."""
        imps = self.relevant[scan.index]
        return imps[0] if len(imps) == 1 else None

    def select_array(self, scan: ConnectorScan, ssel) -> np.ndarray | None:
        """Per-import-entity COUNT / COUNT_QUARTERS select values (kernels)."""
        key = (scan.index, ssel.header_index)
        if key not in self._select_arrays:
            imp = self.fast_import(scan)
            sel = ssel.applied.select
            if imp is None or sel.type not in ("COUNT", "COUNT_QUARTERS"):
                self._select_arrays[key] = None
            else:
                arrays = self.ctx.scan_arrays(scan, imp)
                self._select_arrays[key] = _agg_value_array(
                    self.ctx, imp, arrays.mask, sel.type, sel.column, sel.distinct
                )
        return self._select_arrays[key]

    def date_buffers(self, scan: ConnectorScan):
        """Per-entity coalesced validity ranges of one scan, built in one
        segmented kernel pass: (out_lo, out_hi, offsets, counts)."""
        buf = self._date_buffers.get(scan.index)
        if buf is None:
            imp = self.fast_import(scan)
            if imp is None:
                buf = False
            else:
                arrays = self.ctx.scan_arrays(scan, imp)
                starts, ends = imp.bucket.starts, imp.bucket.ends
                per_entity = K.seg_count(arrays.contrib, starts, ends)
                offsets = np.zeros(len(per_entity) + 1, dtype=np.int64)
                np.cumsum(per_entity, out=offsets[1:])
                out_lo = np.zeros(int(offsets[-1]), dtype=np.int64)
                out_hi = np.zeros(int(offsets[-1]), dtype=np.int64)
                counts = K.seg_coalesce(
                    np.asarray(arrays.vlo, dtype=np.int64),
                    np.asarray(arrays.vhi, dtype=np.int64),
                    arrays.contrib,
                    starts,
                    ends,
                    out_lo,
                    out_hi,
                    offsets[:-1],
                )
                buf = (out_lo, out_hi, offsets, counts)
            self._date_buffers[scan.index] = buf
        return buf

    def scan_dates_fast(self, scan: ConnectorScan, uindex: int) -> DateSet | None:
        buf = self.date_buffers(scan)
        if buf is False:
            return None
        imp = self.fast_import(scan)
        j = int(self.inverse_positions(imp)[uindex])
        if j < 0:
            return EMPTY
        out_lo, out_hi, offsets, counts = buf
        w = int(offsets[j])
        n = int(counts[j])
        sealed = tuple((int(out_lo[w + k]), int(out_hi[w + k])) for k in range(n))
        return DateSet._wrap(sealed)

    # -- satisfaction vectors -------------------------------------------------

    def scan_satisfied(self, scan: ConnectorScan) -> np.ndarray:
        sat = self._scan_sat.get(scan.index)
        if sat is not None:
            return sat
        ctx = self.ctx
        n = len(self.universe)
        sat = np.zeros(n, dtype=bool)
        imps = self.relevant[scan.index]
        if len(imps) == 1:
            imp = imps[0]
            arrays = ctx.scan_arrays(scan, imp)
            ok = K.seg_count(arrays.mask, imp.bucket.starts, imp.bucket.ends) >= 1
            for agg in scan.agg_filters:
                vals = _agg_value_array(
                    ctx, imp, arrays.mask, agg.kind, agg.column, agg.distinct
                )
                ok &= vals >= agg.lo
                if agg.hi is not None:
                    ok &= vals <= agg.hi
            sat[self.positions(imp)] = ok
        elif imps:
            union: dict[str, bool] = {}
            for imp in imps:
                for e in imp.bucket.entities:
                    union[e] = True
            for e in union:
                if _scan_satisfied_entity(ctx, scan, imps, e):
                    sat[self.uidx[e]] = True
        self._scan_sat[scan.index] = sat
        return sat

    def node_satisfied(self, node) -> np.ndarray:
        sat = self._node_sat.get(id(node))
        if sat is not None:
            return sat
        if isinstance(node, PConcept):
            sat = np.zeros(len(self.universe), dtype=bool)
            for scan in node.scans:
                sat |= self.scan_satisfied(scan)
        elif isinstance(node, PBool):
            parts = [self.node_satisfied(c) for c in node.children]
            sat = parts[0].copy()
            for p in parts[1:]:
                if node.op == "AND":
                    sat &= p
                else:
                    sat |= p
        elif isinstance(node, PNegation):
            sat = ~self.node_satisfied(node.child)
        elif isinstance(node, PRestriction):
            sat = self.node_satisfied(node.child)
        elif isinstance(node, PSaved):
            sat = np.fromiter(
                (_saved_satisfied(node, e) for e in self.universe),
                dtype=bool,
                count=len(self.universe),
            )
        else:
            raise TypeError(f"unknown plan node {node!r}")
        self._node_sat[id(node)] = sat
        return sat


def _saved_satisfied(node: PSaved, entity: str) -> bool:
    ds = node.membership.get(entity)
    if ds is None:
        return False
    if node.window is None:
        return True
    return not ds.mask(*node.window).is_empty()


def _window_dateset(window) -> DateSet:
    if window is None or window_empty(window):
        return EMPTY
    return DateSet([window])


# ---------------------------------------------------------------------------
# Per-entity materialization (dates + select values)


def _scan_dates(ctx, scan, imps, entity, extra_mask=None) -> DateSet:
    ranges = []
    for imp in imps:
        rng = imp.bucket.entity_range(entity)
        if rng is None:
            continue
        s, e = rng
        arrays = ctx.scan_arrays(scan, imp)
        m = arrays.contrib[s:e]
        if extra_mask is not None:
            m = m & extra_mask[(imp.import_id, imp.bucket_id)][s:e]
        for i in np.nonzero(m)[0]:
            ranges.append((int(arrays.vlo[s + int(i)]), int(arrays.vhi[s + int(i)])))
    return DateSet(ranges)


def _node_dates(ctx, beval, node, entity, sat_of, extra_mask=None, uindex=None) -> DateSet:
    if isinstance(node, PConcept):
        out = EMPTY
        for scan in node.scans:
            if sat_of(("scan", scan)):
                ds = None
                if uindex is not None and extra_mask is None and beval is not None:
                    ds = beval.scan_dates_fast(scan, uindex)
                if ds is None:
                    imps = beval.relevant[scan.index] if beval else _imps_for(ctx, scan, entity)
                    ds = _scan_dates(ctx, scan, imps, entity, extra_mask)
                out = out.union(ds)
        return out
    if isinstance(node, PBool):
        parts = [
            _node_dates(ctx, beval, c, entity, sat_of, extra_mask, uindex)
            for c in node.children
            if node.op == "AND" or sat_of(("node", c))
        ]
        if node.op == "AND":
            out = parts[0]
            for p in parts[1:]:
                out = out.intersect(p)
            return out
        out = EMPTY
        for p in parts:
            out = out.union(p)
        return out
    if isinstance(node, PNegation):
        return _window_dateset(node.window)
    if isinstance(node, PRestriction):
        return _node_dates(
            ctx, beval, node.child, entity, sat_of, extra_mask, uindex
        ).mask(*node.window)
    if isinstance(node, PSaved):
        ds = node.membership.get(entity, EMPTY)
        if node.window is not None:
            ds = ds.mask(*node.window)
        return ds
    raise TypeError(f"unknown plan node {node!r}")


def _imps_for(ctx, scan, entity):
    bucket_id = entity_bucket(entity, ctx.bucket_count)
    return [
        imp
        for imp in ctx.store.by_bucket.get(bucket_id, [])
        if imp.table == scan.table
        and (ctx.no_skip or scan_may_hit(imp.stats, imp.table, scan))
        and not window_empty(scan.window)
    ]


def _distinct_select_value(ctx, scan, imps, entity, column, extra_mask=None):
    seen = []
    seen_set = set()
    for imp in imps:
        rng = imp.bucket.entity_range(entity)
        if rng is None:
            continue
        s, e = rng
        m = ctx.scan_arrays(scan, imp).mask[s:e]
        if extra_mask is not None:
            m = m & extra_mask[(imp.import_id, imp.bucket_id)][s:e]
        cells = ctx.cell_values(imp, column)
        for i in np.nonzero(m)[0]:
            v = cells[s + int(i)]
            if v is None:
                continue
            cv = canonical_value(v)
            if cv not in seen_set:
                seen_set.add(cv)
                seen.append(cv)
    return seen or None


def canonical_value(v) -> str:
    if isinstance(v, tuple):  # date range
        a = "" if v[0] is None else v[0].isoformat()
        b = "" if v[1] is None else v[1].isoformat()
        return f"{a}/{b}"
    return canonical_str(v)


def _select_value(ctx, beval, scan, ssel, entity, scan_ok: bool, extra_mask=None, uindex=None):
    sel = ssel.applied.select
    if sel.type == "EXISTS":
        return bool(scan_ok)
    if not scan_ok:
        return None
    fast = uindex is not None and extra_mask is None and beval is not None
    if fast and sel.type in ("COUNT", "COUNT_QUARTERS"):
        arr = beval.select_array(scan, ssel)
        if arr is not None:
            j = int(beval.inverse_positions(beval.fast_import(scan))[uindex])
            v = int(arr[j]) if j >= 0 else 0
            return v if v > 0 else None
    if fast and sel.type == "EVENT_DATES":
        ds = beval.scan_dates_fast(scan, uindex)
        if ds is not None:
            return ds if not ds.is_empty() else None
    imps = beval.relevant[scan.index] if beval else _imps_for(ctx, scan, entity)
    if sel.type == "DISTINCT":
        return _distinct_select_value(ctx, scan, imps, entity, sel.column, extra_mask)
    if sel.type == "EVENT_DATES":
        ds = _scan_dates(ctx, scan, imps, entity, extra_mask)
        return ds if not ds.is_empty() else None
    # COUNT / COUNT_QUARTERS
    v = _entity_agg_value(
        ctx, scan, imps, entity, sel.type, sel.column, sel.distinct, extra_mask
    )
    return v if v > 0 else None


def _materialize(
    ctx, beval, entity, sat_of, extra_mask=None, secondary=None, uindex=None
) -> ResultLine:
    plan = ctx.plan
    dates = _node_dates(ctx, beval, plan.root, entity, sat_of, extra_mask, uindex)
    values = [None] * plan.select_count
    for scan in plan.scans:
        if not scan.selects:
            continue
        ok = sat_of(("scan", scan))
        for ssel in scan.selects:
            values[ssel.header_index] = _select_value(
                ctx, beval, scan, ssel, entity, ok, extra_mask, uindex
            )
    return ResultLine(entity, secondary, dates, values)


# ---------------------------------------------------------------------------
# Entry points


def evaluate_bucket(ctx: EvalContext, bucket_id: int) -> list[ResultLine]:
    """Evaluate all entities of a bucket; zero or more lines per entity."""
    beval = _BucketEval(ctx, bucket_id)
    ctx.counters["buckets"] += 1
    ctx.counters["entities"] += len(beval.universe)
    if not beval.universe:
        return []

    if ctx.plan.secondary_key is not None:
        lines = []
        for entity in beval.universe:
            lines.extend(_evaluate_entity_grouped(ctx, beval, entity))
        ctx.counters["lines"] += len(lines)
        return lines

    root_sat = beval.node_satisfied(ctx.plan.root)
    sat_idx = np.nonzero(root_sat)[0]
    if len(sat_idx) == 0:
        return []
    lines = _emit_lines(ctx, beval, sat_idx)
    ctx.counters["lines"] += len(lines)
    return lines


def _emit_lines(ctx: EvalContext, beval: "_BucketEval", sat_idx) -> list[ResultLine]:
    """Materialize result lines for the satisfied universe indices, with all
    per-scan lookups hoisted out of the per-line loop."""
    plan = ctx.plan
    universe = beval.universe

    # per-scan plumbing bound once per bucket
    scan_rows = []
    for scan in plan.scans:
        if not scan.selects:
            continue
        ok_vec = beval.scan_satisfied(scan)
        cells = []
        for ssel in scan.selects:
            arr = beval.select_array(scan, ssel)
            cells.append((ssel, arr))
        imp = beval.fast_import(scan)
        inv = beval.inverse_positions(imp) if imp is not None else None
        scan_rows.append((scan, ok_vec, inv, cells))

    root = plan.root
    simple_root = isinstance(root, PConcept)
    if simple_root:
        root_scan_vecs = [
            (scan, beval.scan_satisfied(scan)) for scan in root.scans
        ]

    lines = []
    for i in sat_idx:
        i = int(i)
        entity = universe[i]

        if simple_root:
            dates = EMPTY
            for scan, ok_vec in root_scan_vecs:
                if ok_vec[i]:
                    ds = beval.scan_dates_fast(scan, i)
                    if ds is None:
                        ds = _scan_dates(ctx, scan, beval.relevant[scan.index], entity)
                    dates = dates.union(ds)
        else:

            def sat_of(key, _i=i):
                kind, obj = key
                if kind == "scan":
                    return bool(beval.scan_satisfied(obj)[_i])
                return bool(beval.node_satisfied(obj)[_i])

            dates = _node_dates(ctx, beval, root, entity, sat_of, uindex=i)

        values = [None] * plan.select_count
        for scan, ok_vec, inv, cells in scan_rows:
            ok = bool(ok_vec[i])
            for ssel, arr in cells:
                stype = ssel.applied.select.type
                if stype == "EXISTS":
                    values[ssel.header_index] = ok
                    continue
                if not ok:
                    continue
                if arr is not None:
                    j = int(inv[i])
                    v = int(arr[j]) if j >= 0 else 0
                    values[ssel.header_index] = v if v > 0 else None
                else:
                    values[ssel.header_index] = _select_value(
                        ctx, beval, scan, ssel, entity, True, None, i
                    )
        lines.append(ResultLine(entity, None, dates, values))
    return lines


def _entity_sat_map(ctx, beval, entity, extra_mask=None):
    """Per-entity satisfaction of every plan node/scan (the general path)."""
    sat: dict = {}

    def scan_ok(scan) -> bool:
        key = ("scan", scan.index)
        if key not in sat:
            imps = beval.relevant[scan.index] if beval else _imps_for(ctx, scan, entity)
            sat[key] = _scan_satisfied_entity(ctx, scan, imps, entity, extra_mask)
        return sat[key]

    def node_ok(node) -> bool:
        key = ("node", id(node))
        if key not in sat:
            if isinstance(node, PConcept):
                sat[key] = any(scan_ok(s) for s in node.scans)
            elif isinstance(node, PBool):
                op = all if node.op == "AND" else any
                sat[key] = op(node_ok(c) for c in node.children)
            elif isinstance(node, PNegation):
                sat[key] = not node_ok(node.child)
            elif isinstance(node, PRestriction):
                sat[key] = node_ok(node.child)
            elif isinstance(node, PSaved):
                sat[key] = _saved_satisfied(node, entity)
            else:
                raise TypeError(f"unknown plan node {node!r}")
        return sat[key]

    return scan_ok, node_ok


def _evaluate_one(ctx, beval, entity, extra_mask=None, secondary=None) -> list[ResultLine]:
    scan_ok, node_ok = _entity_sat_map(ctx, beval, entity, extra_mask)
    if not node_ok(ctx.plan.root):
        return []

    def sat_of(key):
        kind, obj = key
        return scan_ok(obj) if kind == "scan" else node_ok(obj)

    return [_materialize(ctx, beval, entity, sat_of, extra_mask, secondary)]


def _secondary_groups(ctx, beval, entity):
    """Distinct canonical key values over the entity's rows in the plan's
    tables (None groups rows with a null / missing key)."""
    plan, store = ctx.plan, ctx.store
    key_col = plan.secondary_key
    groups: dict[str | None, bool] = {}
    any_rows = False
    imports = store.by_bucket.get(beval.bucket_id, [])
    for imp in imports:
        if imp.table not in plan.tables:
            continue
        rng = imp.bucket.entity_range(entity)
        if rng is None:
            continue
        s, e = rng
        any_rows = True
        if not store.registry.schemas[imp.table].has_column(key_col):
            groups[None] = True
            continue
        cells = ctx.cell_values(imp, key_col)
        for i in range(s, e):
            v = cells[i]
            groups[canonical_value(v) if v is not None else None] = True
    if not any_rows:
        groups[None] = True
    return list(groups.keys())


def _group_masks(ctx, beval, entity, group):
    """Extra per-import row masks restricting events to one secondary value."""
    plan, store = ctx.plan, ctx.store
    key_col = plan.secondary_key
    masks = {}
    for imp in store.by_bucket.get(beval.bucket_id, []):
        n = imp.bucket.row_count
        if not store.registry.schemas[imp.table].has_column(key_col):
            masks[(imp.import_id, imp.bucket_id)] = (
                np.ones(n, dtype=bool) if group is None else np.zeros(n, dtype=bool)
            )
            continue
        cells = ctx.cell_values(imp, key_col)
        cache = ctx._bucket_cache(imp.bucket_id)
        key = ("gm", imp.import_id, group)
        cached = cache.get(key)
        if cached is None:
            if group is None:
                cached = np.fromiter((v is None for v in cells), dtype=bool, count=n)
            else:
                cached = np.fromiter(
                    (v is not None and canonical_value(v) == group for v in cells),
                    dtype=bool,
                    count=n,
                )
            cache[key] = cached
        masks[(imp.import_id, imp.bucket_id)] = cached
    return masks


def _evaluate_entity_grouped(ctx, beval, entity) -> list[ResultLine]:
    lines = []
    for group in _secondary_groups(ctx, beval, entity):
        masks = _group_masks(ctx, beval, entity, group)
        lines.extend(_evaluate_one(ctx, beval, entity, masks, group))
    return lines


def evaluate_entity(ctx: EvalContext, entity: str) -> list[ResultLine]:
    """Evaluate one entity through the general path (used by tests and to
    spot-check the vectorized path)."""
    bucket_id = entity_bucket(entity, ctx.bucket_count)
    beval = _BucketEval(ctx, bucket_id)
    if entity not in beval.uidx:
        known = any(
            entity in imp.bucket.entity_index for imp in ctx.store.by_bucket.get(bucket_id, [])
        )
        if not known and entity not in ctx.plan.membership_entities():
            return []
    if ctx.plan.secondary_key is not None:
        return _evaluate_entity_grouped(ctx, beval, entity)
    return _evaluate_one(ctx, beval, entity)
