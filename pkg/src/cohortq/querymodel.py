"""Query documents: the AST, filter values, validation and result headers.

The wire format follows the CONCEPT_QUERY document shape: a root node of kind
CONCEPT / AND / OR / NEGATION / DATE_RESTRICTION / SAVED_QUERY, where CONCEPT
nodes reference concept-tree nodes plus per-connector filter values, selects
and a validity-date choice. Validation collects every violation instead of
stopping at the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .columns import ColumnType, day_of, parse_iso_date, to_scaled
from .concepts import ConceptTree, FilterDef, SelectDef, TableConnector
from .errors import IdError, ValidationError
from .registry import DatasetRegistry

NODE_KINDS = ("CONCEPT", "AND", "OR", "NEGATION", "DATE_RESTRICTION", "SAVED_QUERY")


# ---------------------------------------------------------------------------
# Filter values


@dataclass(frozen=True)
class KeysValue:
    keys: tuple[str, ...]

    def to_document(self):
        return self.keys[0] if len(self.keys) == 1 else list(self.keys)


@dataclass(frozen=True)
class IntRangeValue:
    min: int | None
    max: int | None

    def to_document(self):
        doc = {}
        if self.min is not None:
            doc["min"] = self.min
        if self.max is not None:
            doc["max"] = self.max
        return doc


@dataclass(frozen=True)
class RealRangeValue:
    """Numeric bounds kept as exact decimal strings."""

    min: str | None
    max: str | None

    def to_document(self):
        doc = {}
        if self.min is not None:
            doc["min"] = self.min
        if self.max is not None:
            doc["max"] = self.max
        return doc


@dataclass(frozen=True)
class AppliedFilter:
    filter_id: str
    filter: FilterDef
    value: KeysValue | IntRangeValue | RealRangeValue

    def to_document(self):
        return {"filter": self.filter_id, "type": self.filter.type, "value": self.value.to_document()}


@dataclass(frozen=True)
class AppliedSelect:
    select_id: str
    select: SelectDef
    connector: TableConnector


@dataclass
class ConceptTable:
    connector_id: str
    connector: TableConnector
    filters: list[AppliedFilter] = field(default_factory=list)
    selects: list[AppliedSelect] = field(default_factory=list)
    date_label: str | None = None  # None = connector's first validity date

    @property
    def validity_column(self) -> str:
        if self.date_label is None:
            return self.connector.validity_dates[0].column
        for v in self.connector.validity_dates:
            if v.label == self.date_label:
                return v.column
        raise IdError(f"unknown date column choice {self.date_label!r}")

    def to_document(self):
        doc = {"id": self.connector_id}
        if self.filters:
            doc["filters"] = [f.to_document() for f in self.filters]
        if self.selects:
            doc["selects"] = [s.select_id for s in self.selects]
        if self.date_label is not None:
            doc["dateColumn"] = self.date_label
        return doc


# ---------------------------------------------------------------------------
# AST nodes


class QueryNode:
    kind: str

    def children(self) -> list["QueryNode"]:
        return []

    def to_document(self) -> dict:
        raise NotImplementedError


@dataclass
class ConceptQuery(QueryNode):
    tree: ConceptTree
    node_ids: list[str]
    node_paths: list[str]  # concept-relative paths of the requested nodes
    tables: list[ConceptTable]
    kind: str = "CONCEPT"

    def to_document(self):
        return {
            "type": "CONCEPT",
            "ids": list(self.node_ids),
            "tables": [t.to_document() for t in self.tables],
        }


@dataclass
class AndQuery(QueryNode):
    nodes: list[QueryNode]
    kind: str = "AND"

    def children(self):
        return self.nodes

    def to_document(self):
        return {"type": "AND", "children": [n.to_document() for n in self.nodes]}


@dataclass
class OrQuery(QueryNode):
    nodes: list[QueryNode]
    kind: str = "OR"

    def children(self):
        return self.nodes

    def to_document(self):
        return {"type": "OR", "children": [n.to_document() for n in self.nodes]}


@dataclass
class NegationQuery(QueryNode):
    child: QueryNode
    kind: str = "NEGATION"

    def children(self):
        return [self.child]

    def to_document(self):
        return {"type": "NEGATION", "child": self.child.to_document()}


@dataclass
class DateRestrictionQuery(QueryNode):
    min_day: int | None
    max_day: int | None
    child: QueryNode
    kind: str = "DATE_RESTRICTION"

    def children(self):
        return [self.child]

    def to_document(self):
        from .columns import date_of

        rng = {}
        if self.min_day is not None:
            rng["min"] = date_of(self.min_day).isoformat()
        if self.max_day is not None:
            rng["max"] = date_of(self.max_day).isoformat()
        return {"type": "DATE_RESTRICTION", "dateRange": rng, "child": self.child.to_document()}


@dataclass
class SavedQuery(QueryNode):
    execution_id: str
    kind: str = "SAVED_QUERY"

    def to_document(self):
        return {"type": "SAVED_QUERY", "query": self.execution_id}


@dataclass
class QueryAST:
    root: QueryNode
    secondary_key: str | None = None

    def to_document(self) -> dict:
        doc = {"type": "CONCEPT_QUERY", "root": self.root.to_document()}
        if self.secondary_key:
            doc["secondaryKey"] = self.secondary_key
        return doc

    def walk(self):
        stack = [self.root]
        while stack:
            node = stack.pop(0)
            yield node
            stack = node.children() + stack

    def concept_nodes(self) -> list[ConceptQuery]:
        return [n for n in self.walk() if isinstance(n, ConceptQuery)]

    def saved_queries(self) -> list[SavedQuery]:
        return [n for n in self.walk() if isinstance(n, SavedQuery)]


# ---------------------------------------------------------------------------
# Parsing / validation


class _Collector:
    def __init__(self):
        self.violations: list[str] = []

    def add(self, message: str):
        self.violations.append(message)

    def raise_if_any(self):
        if self.violations:
            raise ValidationError(self.violations)


def _parse_filter_value(f: FilterDef, raw, errs: _Collector, where: str):
    if f.type == "SELECT":
        keys = [raw] if isinstance(raw, str) else raw
        if not isinstance(keys, list) or not keys or not all(isinstance(k, str) for k in keys):
            errs.add(f"{where}: SELECT filter value must be a key or list of keys")
            return None
        known = {k for k, _ in f.labels}
        bad = [k for k in keys if k not in known]
        if bad:
            errs.add(f"{where}: unknown SELECT keys {bad} (known: {sorted(known)})")
            return None
        return KeysValue(tuple(keys))

    if f.type in ("COUNT", "COUNT_QUARTERS"):
        if not isinstance(raw, dict) or not ("min" in raw or "max" in raw):
            errs.add(f"{where}: integer range value {{min,max}} required")
            return None
        lo, hi = raw.get("min"), raw.get("max")
        for bound, name in ((lo, "min"), (hi, "max")):
            if bound is not None and (isinstance(bound, bool) or not isinstance(bound, int)):
                errs.add(f"{where}: {name} must be an integer")
                return None
        if (lo is not None and lo < 0) or (hi is not None and hi < 0):
            errs.add(f"{where}: bounds must be non-negative")
            return None
        if lo is not None and hi is not None and lo > hi:
            errs.add(f"{where}: min {lo} greater than max {hi}")
            return None
        return IntRangeValue(lo, hi)

    # RANGE
    if not isinstance(raw, dict) or not ("min" in raw or "max" in raw):
        errs.add(f"{where}: numeric range value {{min,max}} required")
        return None
    bounds = {}
    for name in ("min", "max"):
        b = raw.get(name)
        if b is None:
            bounds[name] = None
            continue
        if isinstance(b, bool) or not isinstance(b, (int, float, str)):
            errs.add(f"{where}: {name} must be a number")
            return None
        try:
            bounds[name] = str(Decimal(str(b)))
        except InvalidOperation:
            errs.add(f"{where}: cannot parse {name} value {b!r}")
            return None
    if (
        bounds["min"] is not None
        and bounds["max"] is not None
        and Decimal(bounds["min"]) > Decimal(bounds["max"])
    ):
        errs.add(f"{where}: min {bounds['min']} greater than max {bounds['max']}")
        return None
    return RealRangeValue(bounds["min"], bounds["max"])


def _check_range_scale(f: FilterDef, value: RealRangeValue, ctype: ColumnType, errs, where):
    if ctype == ColumnType.INTEGER:
        for b, name in ((value.min, "min"), (value.max, "max")):
            if b is not None and Decimal(b) != int(Decimal(b)):
                errs.add(f"{where}: {name} must be an integer for column {f.column!r}")
        return
    for b, name in ((value.min, "min"), (value.max, "max")):
        if b is None:
            continue
        try:
            to_scaled(Decimal(b), ctype)
        except Exception:
            errs.add(f"{where}: {name} value {b} does not fit {ctype.value}")


def _parse_concept_node(doc, registry: DatasetRegistry, errs: _Collector, where: str):
    ids = doc.get("ids")
    if not isinstance(ids, list) or not ids:
        errs.add(f"{where}: CONCEPT requires a nonempty 'ids' list")
        return None
    before = len(errs.violations)
    trees = set()
    paths = []
    for i in ids:
        try:
            tree, node = registry.resolve_node(i)
            trees.add(tree.name)
            paths.append(node.path_id)
        except IdError as exc:
            errs.add(f"{where}: {exc}")
    if len(errs.violations) > before:
        return None
    if len(trees) > 1:
        errs.add(f"{where}: concept ids span multiple trees {sorted(trees)}")
        return None
    tree = registry.concepts[next(iter(trees))]

    tables_doc = doc.get("tables")
    if not isinstance(tables_doc, list) or not tables_doc:
        errs.add(f"{where}: CONCEPT requires a nonempty 'tables' list")
        return None

    tables = []
    for ti, t in enumerate(tables_doc):
        twhere = f"{where}.tables[{ti}]"
        cid = t.get("id")
        try:
            ctree, connector = registry.resolve_connector(cid)
        except IdError as exc:
            errs.add(f"{twhere}: {exc}")
            continue
        if ctree.name != tree.name:
            errs.add(f"{twhere}: connector {cid!r} does not belong to concept {tree.name!r}")
            continue
        table = ConceptTable(cid, connector)

        date_label = t.get("dateColumn")
        if date_label is not None:
            if date_label not in [v.label for v in connector.validity_dates]:
                errs.add(
                    f"{twhere}: unknown date column {date_label!r} "
                    f"(choices: {[v.label for v in connector.validity_dates]})"
                )
            else:
                table.date_label = date_label

        for fi, fdoc in enumerate(t.get("filters") or []):
            fwhere = f"{twhere}.filters[{fi}]"
            fid = fdoc.get("filter")
            try:
                ftree, fconn, fdef = registry.resolve_filter(fid)
            except IdError:
                errs.add(f"{fwhere}: unknown filter id {fid!r}")
                continue
            if fconn.name != connector.name or ftree.name != tree.name:
                errs.add(f"{fwhere}: filter {fid!r} does not belong to connector {cid!r}")
                continue
            declared = fdoc.get("type")
            if declared is not None and declared != fdef.type:
                errs.add(f"{fwhere}: filter {fid!r} has type {fdef.type}, not {declared}")
                continue
            value = _parse_filter_value(fdef, fdoc.get("value"), errs, fwhere)
            if value is None:
                continue
            if fdef.type == "RANGE":
                ctype = registry.schemas[connector.table].column(fdef.column).type
                _check_range_scale(fdef, value, ctype, errs, fwhere)
            table.filters.append(AppliedFilter(fid, fdef, value))

        for si, sid in enumerate(t.get("selects") or []):
            swhere = f"{twhere}.selects[{si}]"
            try:
                stree, sconn, sdef = registry.resolve_select(sid)
            except IdError:
                errs.add(f"{swhere}: unknown select id {sid!r}")
                continue
            if sconn.name != connector.name or stree.name != tree.name:
                errs.add(f"{swhere}: select {sid!r} does not belong to connector {cid!r}")
                continue
            table.selects.append(AppliedSelect(sid, sdef, connector))

        tables.append(table)

    if not tables:
        return None
    return ConceptQuery(tree, list(ids), paths, tables)


def _parse_node(doc, registry, errs: _Collector, where: str):
    if not isinstance(doc, dict):
        errs.add(f"{where}: query node must be an object")
        return None
    kind = doc.get("type")
    if kind not in NODE_KINDS:
        errs.add(f"{where}: unknown query node type {kind!r}")
        return None

    if kind == "CONCEPT":
        return _parse_concept_node(doc, registry, errs, where)

    if kind in ("AND", "OR"):
        children_doc = doc.get("children")
        if not isinstance(children_doc, list) or not children_doc:
            errs.add(f"{where}: {kind} requires a nonempty 'children' list")
            return None
        children = [
            _parse_node(c, registry, errs, f"{where}.children[{i}]")
            for i, c in enumerate(children_doc)
        ]
        if any(c is None for c in children):
            return None
        return AndQuery(children) if kind == "AND" else OrQuery(children)

    if kind == "NEGATION":
        if "child" not in doc:
            errs.add(f"{where}: NEGATION requires a 'child'")
            return None
        child = _parse_node(doc["child"], registry, errs, f"{where}.child")
        return None if child is None else NegationQuery(child)

    if kind == "DATE_RESTRICTION":
        rng = doc.get("dateRange")
        if not isinstance(rng, dict) or not ("min" in rng or "max" in rng):
            errs.add(f"{where}: DATE_RESTRICTION requires a dateRange with min and/or max")
            return None
        days = {}
        for name in ("min", "max"):
            if rng.get(name) is None:
                days[name] = None
                continue
            try:
                days[name] = day_of(parse_iso_date(rng[name]))
            except (ValueError, TypeError):
                errs.add(f"{where}: cannot parse dateRange.{name} {rng.get(name)!r}")
                return None
        if days["min"] is not None and days["max"] is not None and days["min"] > days["max"]:
            errs.add(f"{where}: dateRange min after max")
            return None
        if "child" not in doc:
            errs.add(f"{where}: DATE_RESTRICTION requires a 'child'")
            return None
        child = _parse_node(doc["child"], registry, errs, f"{where}.child")
        return None if child is None else DateRestrictionQuery(days["min"], days["max"], child)

    # SAVED_QUERY
    exec_id = doc.get("query")
    if not isinstance(exec_id, str) or not exec_id:
        errs.add(f"{where}: SAVED_QUERY requires a 'query' execution id")
        return None
    return SavedQuery(exec_id)


def parse_query(doc: dict, registry: DatasetRegistry) -> QueryAST:
    """Parse and validate a query document; raises ValidationError listing
    every violation found."""
    errs = _Collector()
    if not isinstance(doc, dict):
        raise ValidationError(["query document must be an object"])
    if doc.get("type") != "CONCEPT_QUERY":
        errs.add(f"$.type: expected CONCEPT_QUERY, got {doc.get('type')!r}")
    if "root" not in doc:
        errs.add("$.root: required")
        errs.raise_if_any()
    root = _parse_node(doc["root"], registry, errs, "$.root")
    errs.raise_if_any()
    assert root is not None

    ast = QueryAST(root)
    key = doc.get("secondaryKey")
    if key is not None:
        if not isinstance(key, str) or not key:
            errs.add("$.secondaryKey: nonempty string required")
        else:
            key = key.rsplit(".", 1)[-1]
            tables = {t.connector.table for c in ast.concept_nodes() for t in c.tables}
            if not any(registry.schemas[t].has_column(key) for t in tables):
                errs.add(f"$.secondaryKey: column {key!r} exists in none of the queried tables")
            else:
                ast.secondary_key = key
    errs.raise_if_any()
    return ast


# ---------------------------------------------------------------------------
# Result header


@dataclass(frozen=True)
class HeaderColumn:
    key: str  # 'result' | 'secondary' | 'dates' | select id
    label: str
    select: AppliedSelect | None = None


def result_header(ast: QueryAST) -> list[HeaderColumn]:
    """Deterministic column order: entity id, [secondary key], dates, then the
    selects of every concept node in depth-first order (table entries and their
    selects in declaration order). Duplicate labels get the connector label as
    a prefix."""
    cols = [HeaderColumn("result", "result")]
    if ast.secondary_key:
        cols.append(HeaderColumn("secondary", ast.secondary_key))
    cols.append(HeaderColumn("dates", "dates"))

    picked: list[AppliedSelect] = []
    for node in ast.walk():
        if isinstance(node, ConceptQuery):
            for table in node.tables:
                picked.extend(table.selects)

    labels = [s.select.label for s in picked]
    for sel in picked:
        label = sel.select.label
        if labels.count(label) > 1:
            label = f"{sel.connector.label} {label}"
        cols.append(HeaderColumn(sel.select_id, label, sel))
    return cols
