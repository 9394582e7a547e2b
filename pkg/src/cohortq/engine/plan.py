"""Translation of a validated AST into an executable per-worker plan.

Every AST node maps to exactly one plan node. CONCEPT nodes compile into one
ConnectorScan per table entry with all event-level predicates resolved
(concept dfs intervals, filter key sets, scaled numeric bounds, the effective
date-restriction window pushed down from enclosing nodes) plus the
aggregation-level bounds. SAVED_QUERY nodes are replaced by explicit
entity -> DateSet membership tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

from ..columns import ColumnType, to_scaled
from ..dateset import DateSet
from ..errors import PlanError
from ..querymodel import (
    AndQuery,
    AppliedSelect,
    ConceptQuery,
    DateRestrictionQuery,
    HeaderColumn,
    IntRangeValue,
    NegationQuery,
    OrQuery,
    QueryAST,
    SavedQuery,
    result_header,
)
from ..registry import DatasetRegistry
from ..statistics import ImportStatistics

Window = tuple[int | None, int | None]


def intersect_windows(a: Window | None, b: Window | None) -> Window | None:
    if a is None:
        return b
    if b is None:
        return a
    lo = a[0] if b[0] is None else (b[0] if a[0] is None else max(a[0], b[0]))
    hi = a[1] if b[1] is None else (b[1] if a[1] is None else min(a[1], b[1]))
    return (lo, hi)


def window_empty(w: Window | None) -> bool:
    return w is not None and w[0] is not None and w[1] is not None and w[0] > w[1]


@dataclass
class AggFilter:
    kind: str  # COUNT | COUNT_QUARTERS
    column: str
    distinct: bool
    lo: int
    hi: int | None  # None = unbounded


@dataclass
class ScanSelect:
    applied: AppliedSelect
    header_index: int  # position in the select section of the result line


@dataclass
class ConnectorScan:
    index: int
    concept: str
    table: str
    code_column: str
    intervals: list[tuple[int, int]]
    validity_column: str
    validity_type: ColumnType
    window: Window | None
    key_filters: list[tuple[str, frozenset]] = field(default_factory=list)
    range_filters: list[tuple[str, int | None, int | None]] = field(default_factory=list)
    agg_filters: list[AggFilter] = field(default_factory=list)
    selects: list[ScanSelect] = field(default_factory=list)


class PlanNode:
    kind = ""


@dataclass
class PConcept(PlanNode):
    scans: list[ConnectorScan]
    kind: str = "CONCEPT"


@dataclass
class PBool(PlanNode):
    op: str  # AND | OR
    children: list[PlanNode] = field(default_factory=list)
    kind: str = "BOOL"


@dataclass
class PNegation(PlanNode):
    child: PlanNode
    window: Window | None  # nearest enclosing restriction: the dates of a
    kind: str = "NEGATION"  # satisfied negation


@dataclass
class PRestriction(PlanNode):
    window: Window
    child: PlanNode
    kind: str = "RESTRICTION"


@dataclass
class PSaved(PlanNode):
    execution_id: str
    membership: dict[str, DateSet]
    window: Window | None
    kind: str = "SAVED"


@dataclass
class QueryPlan:
    ast: QueryAST
    root: PlanNode
    scans: list[ConnectorScan]
    header: list[HeaderColumn]
    select_count: int
    secondary_key: str | None
    tables: set[str]
    needs_scan_hit: bool
    memberships: dict[str, dict[str, DateSet]]

    def membership_entities(self) -> set[str]:
        out: set[str] = set()
        for table in self.memberships.values():
            out.update(table.keys())
        return out


def _needs_scan_hit(node) -> bool:
    """True when no entity can satisfy the subtree without >=1 matching event."""
    if isinstance(node, ConceptQuery):
        return True
    if isinstance(node, AndQuery):
        return any(_needs_scan_hit(c) for c in node.nodes)
    if isinstance(node, OrQuery):
        return all(_needs_scan_hit(c) for c in node.nodes)
    if isinstance(node, NegationQuery):
        return False
    if isinstance(node, DateRestrictionQuery):
        return _needs_scan_hit(node.child)
    if isinstance(node, SavedQuery):
        return False  # membership presence suffices, no event needed
    raise TypeError(f"unknown query node {node!r}")


class _Builder:
    def __init__(self, registry: DatasetRegistry, memberships, header):
        self.registry = registry
        self.memberships = memberships
        self.scans: list[ConnectorScan] = []
        # selects appear in the same DFS order as in result_header
        self._select_slots = [c for c in header if c.select is not None]
        self._next_select = 0

    def build(self, node, window: Window | None) -> PlanNode:
        if isinstance(node, ConceptQuery):
            return self._build_concept(node, window)
        if isinstance(node, AndQuery):
            return PBool("AND", [self.build(c, window) for c in node.nodes])
        if isinstance(node, OrQuery):
            return PBool("OR", [self.build(c, window) for c in node.nodes])
        if isinstance(node, NegationQuery):
            return PNegation(self.build(node.child, window), window)
        if isinstance(node, DateRestrictionQuery):
            inner = intersect_windows(window, (node.min_day, node.max_day))
            return PRestriction(inner, self.build(node.child, inner))
        if isinstance(node, SavedQuery):
            if node.execution_id not in self.memberships:
                raise PlanError(f"saved query {node.execution_id!r} is not available")
            return PSaved(node.execution_id, self.memberships[node.execution_id], window)
        raise TypeError(f"unknown query node {node!r}")

    def _build_concept(self, node: ConceptQuery, window: Window | None) -> PConcept:
        tree = node.tree
        intervals = []
        for path in node.node_paths:
            n = tree.node_by_path(path)
            intervals.append((int(n.dfs_lo), int(n.dfs_hi)))

        scans = []
        for table in node.tables:
            conn = table.connector
            schema = self.registry.schemas[conn.table]
            validity_col = table.validity_column
            scan = ConnectorScan(
                index=len(self.scans),
                concept=tree.name,
                table=conn.table,
                code_column=conn.column,
                intervals=intervals,
                validity_column=validity_col,
                validity_type=schema.column(validity_col).type,
                window=window,
            )
            for af in table.filters:
                f = af.filter
                if f.type == "SELECT":
                    scan.key_filters.append((f.column, frozenset(af.value.keys)))
                elif f.type == "RANGE":
                    ctype = schema.column(f.column).type
                    lo = _scale_bound(af.value.min, ctype)
                    hi = _scale_bound(af.value.max, ctype)
                    scan.range_filters.append((f.column, lo, hi))
                else:  # COUNT / COUNT_QUARTERS
                    v: IntRangeValue = af.value
                    scan.agg_filters.append(
                        AggFilter(f.type, f.column, f.distinct, v.min or 0, v.max)
                    )
            for sel in table.selects:
                slot = self._select_slots[self._next_select]
                assert slot.select is sel
                scan.selects.append(ScanSelect(sel, self._next_select))
                self._next_select += 1
            scans.append(scan)
            self.scans.append(scan)
        return PConcept(scans)


def _scale_bound(bound: str | None, ctype: ColumnType) -> int | None:
    if bound is None:
        return None
    if ctype == ColumnType.INTEGER:
        return int(Decimal(bound))
    return to_scaled(Decimal(bound), ctype)


def build_plan(
    ast: QueryAST,
    registry: DatasetRegistry,
    memberships: dict[str, dict[str, DateSet]] | None = None,
) -> QueryPlan:
    """Compile the AST; ``memberships`` must carry an entity -> DateSet table
    for every SAVED_QUERY the AST references (PlanError otherwise)."""
    memberships = memberships or {}
    header = result_header(ast)
    builder = _Builder(registry, memberships, header)
    root = builder.build(ast.root, None)
    used = {s.execution_id for s in ast.saved_queries()}
    return QueryPlan(
        ast=ast,
        root=root,
        scans=builder.scans,
        header=header,
        select_count=sum(1 for c in header if c.select is not None),
        secondary_key=ast.secondary_key,
        tables={s.table for s in builder.scans},
        needs_scan_hit=_needs_scan_hit(ast.root),
        memberships={k: v for k, v in memberships.items() if k in used},
    )


def scan_may_hit(stats: ImportStatistics, table: str, scan: ConnectorScan) -> bool:
    """Could any event of the import match the scan? Sound, never falsely no."""
    if table != scan.table:
        return False
    if window_empty(scan.window):
        return False
    hit = False
    for lo, hi in scan.intervals:
        if stats.nodes_overlap(scan.concept, scan.code_column, lo, hi):
            hit = True
            break
    if not hit:
        return False
    if scan.window is not None:
        cstats = stats.columns.get(scan.validity_column)
        if cstats is not None and not cstats.window_overlaps(*scan.window):
            return False
    return True


def can_skip(stats: ImportStatistics, table: str, plan: QueryPlan) -> bool:
    """True only if no event in the import can contribute to any scan."""
    return not any(scan_may_hit(stats, table, scan) for scan in plan.scans)
