"""Concept hierarchies: operator-defined classification trees whose nodes carry
match conditions, plus the connectors binding a concept to event tables.

Codes resolve to the deepest node whose root-to-node condition chain matches.
Each node indexes its children in a character trie so PREFIX / PREFIX_RANGE /
EQUAL dispatch does not scan all siblings; results are memoized. Subtree
membership is an O(1) DFS-interval test.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal

import numpy as np

from .columns import ColumnType, TableSchema
from .errors import ConceptParseError, IdError

_YES, _NO, _MAYBE = 1, 0, 2


def canonical_str(value) -> str:
    """Canonical text form used for COLUMN_EQUAL comparisons and SELECT keys."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, date):
        return value.isoformat()
    if isinstance(value, Decimal):
        return format(value.normalize(), "f")
    return str(value)


def slug(label: str) -> str:
    s = re.sub(r"[^A-Za-z0-9]+", "_", label.strip().lower()).strip("_")
    return s or "unnamed"


# ---------------------------------------------------------------------------
# Conditions


class Condition:
    def matches(self, code: str, aux) -> bool:
        raise NotImplementedError

    def tri(self, code: str) -> int:
        """Three-valued match ignoring aux columns: YES / NO / MAYBE."""
        raise NotImplementedError

    def aux_columns(self) -> set[str]:
        return set()

    def to_document(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Prefix(Condition):
    prefix: str

    def matches(self, code, aux):
        return code.startswith(self.prefix)

    def tri(self, code):
        return _YES if code.startswith(self.prefix) else _NO

    def to_document(self):
        return {"type": "PREFIX", "prefix": self.prefix}


@dataclass(frozen=True)
class PrefixRange(Condition):
    min: str
    max: str

    def matches(self, code, aux):
        k = len(self.min)
        return len(code) >= k and self.min <= code[:k] <= self.max

    def tri(self, code):
        return _YES if self.matches(code, None) else _NO

    def to_document(self):
        return {"type": "PREFIX_RANGE", "min": self.min, "max": self.max}


@dataclass(frozen=True)
class Equal(Condition):
    values: tuple[str, ...]

    def matches(self, code, aux):
        return code in self.values

    def tri(self, code):
        return _YES if code in self.values else _NO

    def to_document(self):
        return {"type": "EQUAL", "values": list(self.values)}


@dataclass(frozen=True)
class ColumnEqual(Condition):
    column: str
    values: tuple[str, ...]

    def matches(self, code, aux):
        if not aux:
            return False
        v = aux.get(self.column)
        return v is not None and canonical_str(v) in self.values

    def tri(self, code):
        return _MAYBE

    def aux_columns(self):
        return {self.column}

    def to_document(self):
        return {"type": "COLUMN_EQUAL", "column": self.column, "values": list(self.values)}


@dataclass(frozen=True)
class And(Condition):
    conditions: tuple[Condition, ...]

    def matches(self, code, aux):
        return all(c.matches(code, aux) for c in self.conditions)

    def tri(self, code):
        states = [c.tri(code) for c in self.conditions]
        if _NO in states:
            return _NO
        return _MAYBE if _MAYBE in states else _YES

    def aux_columns(self):
        return set().union(*(c.aux_columns() for c in self.conditions)) if self.conditions else set()

    def to_document(self):
        return {"type": "AND", "conditions": [c.to_document() for c in self.conditions]}


@dataclass(frozen=True)
class Or(Condition):
    conditions: tuple[Condition, ...]

    def matches(self, code, aux):
        return any(c.matches(code, aux) for c in self.conditions)

    def tri(self, code):
        states = [c.tri(code) for c in self.conditions]
        if _YES in states:
            return _YES
        return _MAYBE if _MAYBE in states else _NO

    def aux_columns(self):
        return set().union(*(c.aux_columns() for c in self.conditions)) if self.conditions else set()

    def to_document(self):
        return {"type": "OR", "conditions": [c.to_document() for c in self.conditions]}


@dataclass(frozen=True)
class Not(Condition):
    condition: Condition

    def matches(self, code, aux):
        return not self.condition.matches(code, aux)

    def tri(self, code):
        s = self.condition.tri(code)
        if s == _MAYBE:
            return _MAYBE
        return _NO if s == _YES else _YES

    def aux_columns(self):
        return self.condition.aux_columns()

    def to_document(self):
        return {"type": "NOT", "condition": self.condition.to_document()}


def parse_condition(doc, path: str) -> Condition:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ConceptParseError(path, "condition must be an object with a 'type'")
    ctype = doc["type"]
    if ctype == "PREFIX":
        if not isinstance(doc.get("prefix"), str):
            raise ConceptParseError(path + ".prefix", "string required")
        return Prefix(doc["prefix"])
    if ctype == "PREFIX_RANGE":
        mn, mx = doc.get("min"), doc.get("max")
        if not isinstance(mn, str) or not isinstance(mx, str):
            raise ConceptParseError(path, "PREFIX_RANGE needs string min and max")
        if len(mn) != len(mx):
            raise ConceptParseError(path, f"min/max must have equal length ({mn!r} vs {mx!r})")
        if mn > mx:
            raise ConceptParseError(path, f"min {mn!r} greater than max {mx!r}")
        return PrefixRange(mn, mx)
    if ctype == "EQUAL":
        values = doc.get("values", [doc["value"]] if "value" in doc else None)
        if not values or not all(isinstance(v, str) for v in values):
            raise ConceptParseError(path + ".values", "nonempty string list required")
        return Equal(tuple(values))
    if ctype == "COLUMN_EQUAL":
        values = doc.get("values", [doc["value"]] if "value" in doc else None)
        if not isinstance(doc.get("column"), str):
            raise ConceptParseError(path + ".column", "string required")
        if not values or not all(isinstance(v, str) for v in values):
            raise ConceptParseError(path + ".values", "nonempty string list required")
        column = doc["column"].rsplit(".", 1)[-1]
        return ColumnEqual(column, tuple(values))
    if ctype in ("AND", "OR"):
        subs = doc.get("conditions")
        if not isinstance(subs, list) or not subs:
            raise ConceptParseError(path + ".conditions", "nonempty list required")
        parsed = tuple(
            parse_condition(s, f"{path}.conditions[{i}]") for i, s in enumerate(subs)
        )
        return And(parsed) if ctype == "AND" else Or(parsed)
    if ctype == "NOT":
        if "condition" not in doc:
            raise ConceptParseError(path + ".condition", "required")
        return Not(parse_condition(doc["condition"], path + ".condition"))
    raise ConceptParseError(path + ".type", f"unknown condition type {ctype!r}")


# ---------------------------------------------------------------------------
# Filters and selects (connector metadata)

FILTER_TYPES = ("SELECT", "COUNT", "RANGE", "COUNT_QUARTERS")
SELECT_TYPES = ("DISTINCT", "COUNT", "COUNT_QUARTERS", "EVENT_DATES", "EXISTS")


@dataclass(frozen=True)
class FilterDef:
    name: str
    label: str
    type: str
    column: str | None = None
    labels: tuple[tuple[str, str], ...] = ()  # SELECT: (key, display) pairs
    distinct: bool = False

    def to_document(self) -> dict:
        doc = {"name": self.name, "label": self.label, "type": self.type}
        if self.column:
            doc["column"] = self.column
        if self.type == "SELECT":
            doc["labels"] = dict(self.labels)
        if self.type == "COUNT":
            doc["distinct"] = self.distinct
        return doc


@dataclass(frozen=True)
class SelectDef:
    name: str
    label: str
    type: str
    column: str | None = None
    distinct: bool = False

    def to_document(self) -> dict:
        doc = {"name": self.name, "label": self.label, "type": self.type}
        if self.column:
            doc["column"] = self.column
        if self.type == "COUNT":
            doc["distinct"] = self.distinct
        return doc


@dataclass(frozen=True)
class ValidityDate:
    label: str
    column: str


@dataclass
class TableConnector:
    name: str
    label: str
    table: str
    column: str  # the concept-bearing column
    validity_dates: list[ValidityDate]
    filters: list[FilterDef] = field(default_factory=list)
    selects: list[SelectDef] = field(default_factory=list)

    def filter_by_name(self, name: str) -> FilterDef | None:
        return next((f for f in self.filters if f.name == name), None)

    def select_by_name(self, name: str) -> SelectDef | None:
        return next((s for s in self.selects if s.name == name), None)


def _split_column(ref: str, table: str, path: str) -> str:
    """Accept 'table.column' or bare 'column'; enforce the table part."""
    if "." in ref:
        tbl, col = ref.rsplit(".", 1)
        if tbl != table:
            raise ConceptParseError(path, f"column {ref!r} does not belong to table {table!r}")
        return col
    return ref


def _require_column(schema: TableSchema, col: str, kinds, path: str):
    if not schema.has_column(col):
        raise ConceptParseError(path, f"table {schema.name!r} has no column {col!r}")
    if kinds is not None and schema.column(col).type not in kinds:
        raise ConceptParseError(
            path,
            f"column {col!r} has type {schema.column(col).type.value}, "
            f"expected one of {[k.value for k in kinds]}",
        )


def parse_connector(doc: dict, schemas: dict[str, TableSchema], path: str) -> TableConnector:
    label = doc.get("label")
    if not isinstance(label, str) or not label:
        raise ConceptParseError(path + ".label", "nonempty string required")
    name = doc.get("name") or slug(label)

    column_ref = doc.get("column")
    if not isinstance(column_ref, str) or "." not in column_ref:
        raise ConceptParseError(path + ".column", "qualified 'table.column' reference required")
    table = column_ref.rsplit(".", 1)[0]
    if table not in schemas:
        raise ConceptParseError(path + ".column", f"unknown table {table!r}")
    schema = schemas[table]
    column = column_ref.rsplit(".", 1)[1]
    _require_column(schema, column, (ColumnType.STRING,), path + ".column")

    vdates = []
    for i, vd in enumerate(doc.get("validityDates") or []):
        vpath = f"{path}.validityDates[{i}]"
        col = _split_column(vd.get("column", ""), table, vpath + ".column")
        _require_column(schema, col, (ColumnType.DATE, ColumnType.DATE_RANGE), vpath + ".column")
        vdates.append(ValidityDate(vd.get("label") or col, col))
    if not vdates:
        raise ConceptParseError(path + ".validityDates", "at least one validity date required")

    filters = []
    for i, f in enumerate(doc.get("filters") or []):
        fpath = f"{path}.filters[{i}]"
        ftype = f.get("type")
        if ftype not in FILTER_TYPES:
            raise ConceptParseError(fpath + ".type", f"unknown filter type {ftype!r}")
        flabel = f.get("label") or ftype.lower()
        fname = f.get("name") or slug(flabel)
        col = _split_column(f.get("column", ""), table, fpath + ".column")
        if ftype == "SELECT":
            _require_column(schema, col, (ColumnType.STRING,), fpath + ".column")
            labels = f.get("labels")
            if not isinstance(labels, dict) or not labels:
                raise ConceptParseError(fpath + ".labels", "nonempty map required")
            if len(set(labels)) != len(labels):
                raise ConceptParseError(fpath + ".labels", "duplicate keys")
            filters.append(FilterDef(fname, flabel, "SELECT", col, tuple(labels.items())))
        elif ftype == "COUNT":
            _require_column(schema, col, None, fpath + ".column")
            filters.append(
                FilterDef(fname, flabel, "COUNT", col, distinct=bool(f.get("distinct")))
            )
        elif ftype == "RANGE":
            _require_column(
                schema,
                col,
                (ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.MONEY),
                fpath + ".column",
            )
            filters.append(FilterDef(fname, flabel, "RANGE", col))
        else:  # COUNT_QUARTERS
            _require_column(
                schema, col, (ColumnType.DATE, ColumnType.DATE_RANGE), fpath + ".column"
            )
            filters.append(FilterDef(fname, flabel, "COUNT_QUARTERS", col))
    if len({f.name for f in filters}) != len(filters):
        raise ConceptParseError(path + ".filters", "duplicate filter names")

    selects = []
    for i, s in enumerate(doc.get("selects") or []):
        spath = f"{path}.selects[{i}]"
        stype = s.get("type")
        if stype not in SELECT_TYPES:
            raise ConceptParseError(spath + ".type", f"unknown select type {stype!r}")
        slabel = s.get("label") or stype.lower()
        sname = s.get("name") or slug(slabel)
        if stype in ("EVENT_DATES", "EXISTS"):
            selects.append(SelectDef(sname, slabel, stype))
            continue
        col = _split_column(s.get("column", ""), table, spath + ".column")
        if stype == "COUNT_QUARTERS":
            _require_column(
                schema, col, (ColumnType.DATE, ColumnType.DATE_RANGE), spath + ".column"
            )
        else:
            _require_column(schema, col, None, spath + ".column")
        selects.append(
            SelectDef(sname, slabel, stype, col, distinct=bool(s.get("distinct")))
        )
    if len({s.name for s in selects}) != len(selects):
        raise ConceptParseError(path + ".selects", "duplicate select names")

    return TableConnector(name, label, table, column, vdates, filters, selects)


# ---------------------------------------------------------------------------
# Tree nodes and the per-node child trie


class _ChildTrie:
    """Character trie over the dispatchable child conditions of one node."""

    __slots__ = ("children", "prefix_hits", "equal_hits")

    def __init__(self):
        self.children: dict[str, _ChildTrie] = {}
        self.prefix_hits: list[int] = []
        self.equal_hits: list[int] = []

    def insert(self, text: str, child_idx: int, exact: bool):
        node = self
        for ch in text:
            nxt = node.children.get(ch)
            if nxt is None:
                nxt = _ChildTrie()
                node.children[ch] = nxt
            node = nxt
        (node.equal_hits if exact else node.prefix_hits).append(child_idx)

    def collect(self, code: str) -> list[int]:
        hits = list(self.prefix_hits)
        node = self
        for i, ch in enumerate(code):
            node = node.children.get(ch)
            if node is None:
                return hits
            hits.extend(node.prefix_hits)
            if i == len(code) - 1:
                hits.extend(node.equal_hits)
        return hits


class ConceptNode:
    def __init__(self, name: str, description: str, condition: Condition | None, children):
        self.name = name
        self.description = description
        self.condition = condition
        self.children: list[ConceptNode] = children
        self.dfs_lo = -1
        self.dfs_hi = -1
        self.index = -1
        self.path_id = ""
        # dispatch structures, built once after parse
        self._trie: _ChildTrie | None = None
        self._ranges: list[tuple[int, str, str, int]] = []  # (k, min, max, child idx)
        self._scan: list[int] = []

    def _build_dispatch(self):
        trie = _ChildTrie()
        ranges = []
        scan = []
        for i, child in enumerate(self.children):
            cond = child.condition
            if isinstance(cond, Prefix):
                trie.insert(cond.prefix, i, exact=False)
            elif isinstance(cond, Equal):
                for v in cond.values:
                    trie.insert(v, i, exact=True)
            elif isinstance(cond, PrefixRange):
                ranges.append((len(cond.min), cond.min, cond.max, i))
            else:
                scan.append(i)
        self._trie = trie
        self._ranges = ranges
        self._scan = scan

    def candidate_children(self, code: str) -> list[int]:
        """Indices of children that may match, in declaration order."""
        hits = self._trie.collect(code)
        for k, mn, mx, i in self._ranges:
            if len(code) >= k and mn <= code[:k] <= mx:
                hits.append(i)
        hits.extend(self._scan)
        hits = sorted(set(hits))
        return hits

    def to_document(self, full_id_prefix: str) -> dict:
        my_id = f"{full_id_prefix}.{self.name}" if full_id_prefix else self.name
        return {
            "id": my_id,
            "name": self.name,
            "description": self.description,
            "condition": self.condition.to_document() if self.condition else None,
            "children": [c.to_document(my_id) for c in self.children],
        }


def _parse_node(doc: dict, path: str) -> ConceptNode:
    if not isinstance(doc, dict):
        raise ConceptParseError(path, "node must be an object")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ConceptParseError(path + ".name", "nonempty string required")
    condition = None
    if doc.get("condition") is not None:
        condition = parse_condition(doc["condition"], path + ".condition")
    children = [
        _parse_node(c, f"{path}.children[{i}]") for i, c in enumerate(doc.get("children") or [])
    ]
    names = [c.name for c in children]
    if len(set(names)) != len(names):
        raise ConceptParseError(path + ".children", "duplicate child names")
    return ConceptNode(name, (doc.get("description") or "").strip(), condition, children)


class ConceptTree:
    """Parsed concept with DFS-numbered nodes, connectors and a resolve cache."""

    def __init__(self, root: ConceptNode, connectors: list[TableConnector]):
        self.root = root
        self.name = root.name
        self.connectors = connectors
        self.nodes: list[ConceptNode] = []
        self._number(root, root.name)
        self.by_path: dict[str, ConceptNode] = {n.path_id: n for n in self.nodes}
        self.dfs_lo = np.array([n.dfs_lo for n in self.nodes], dtype=np.int64)
        self.dfs_hi = np.array([n.dfs_hi for n in self.nodes], dtype=np.int64)
        self.aux_columns: set[str] = set()
        for n in self.nodes:
            if n.condition is not None:
                self.aux_columns |= n.condition.aux_columns()
        self._cache: dict = {}
        self._cache_lock = threading.Lock()

    def _number(self, node: ConceptNode, path_id: str):
        node.index = len(self.nodes)
        node.dfs_lo = node.index
        node.path_id = path_id
        self.nodes.append(node)
        node._build_dispatch()
        for child in node.children:
            self._number(child, f"{path_id}.{child.name}")
        node.dfs_hi = len(self.nodes) - 1

    def connector_by_name(self, name: str) -> TableConnector | None:
        return next((c for c in self.connectors if c.name == name), None)

    def node_by_path(self, path_id: str) -> ConceptNode:
        node = self.by_path.get(path_id)
        if node is None:
            raise IdError(f"unknown concept node {path_id!r}")
        return node

    def subtree_contains(self, ancestor_path: str, node_path: str) -> bool:
        a = self.node_by_path(ancestor_path)
        n = self.node_by_path(node_path)
        return a.dfs_lo <= n.dfs_lo and n.dfs_hi <= a.dfs_hi

    # -- resolution ---------------------------------------------------------

    def _aux_key(self, aux) -> tuple:
        if not aux or not self.aux_columns:
            return ()
        return tuple(
            (c, canonical_str(aux[c])) for c in sorted(self.aux_columns) if aux.get(c) is not None
        )

    def resolve(self, code: str, aux=None) -> ConceptNode | None:
        """Deepest node whose condition chain matches; None when the root fails."""
        key = (code, self._aux_key(aux))
        hit = self._cache.get(key, _MISS)
        if hit is not _MISS:
            return hit
        result = self._resolve_cold(code, aux)
        with self._cache_lock:
            self._cache[key] = result
        return result

    def _resolve_cold(self, code: str, aux) -> ConceptNode | None:
        node = self.root
        if node.condition is not None and not node.condition.matches(code, aux):
            return None
        while True:
            advanced = False
            for i in node.candidate_children(code):
                child = node.children[i]
                if child.condition is None or child.condition.matches(code, aux):
                    node = child
                    advanced = True
                    break
            if not advanced:
                return node

    def resolve_naive(self, code: str, aux=None) -> ConceptNode | None:
        """Reference resolution scanning every child; used by tests."""
        node = self.root
        if node.condition is not None and not node.condition.matches(code, aux):
            return None
        while True:
            for child in node.children:
                if child.condition is None or child.condition.matches(code, aux):
                    node = child
                    break
            else:
                return node

    def possible_nodes(self, code: str) -> set[int]:
        """Superset of node indices the code may resolve to under any aux values."""
        root_state = self.root.condition.tri(code) if self.root.condition else _YES
        if root_state == _NO:
            return set()
        return self._possible(self.root, code)

    def _possible(self, node: ConceptNode, code: str) -> set[int]:
        out: set[int] = set()
        saw_yes = False
        for child in node.children:
            state = child.condition.tri(code) if child.condition else _YES
            if state == _YES:
                out |= self._possible(child, code)
                saw_yes = True
                break
            if state == _MAYBE:
                out |= self._possible(child, code)
        if not saw_yes:
            out.add(node.index)
        return out

    def build_assignment(self, dictionary: list[str]) -> "Assignment":
        return Assignment(self, dictionary)

    def to_document(self, id_prefix: str) -> dict:
        return self.root.to_document(id_prefix)


_MISS = object()


class Assignment:
    """Precomputed dictionary-code -> node mapping for one loaded block.

    Codes whose resolution depends on auxiliary event columns are flagged;
    the engine resolves those per event through the (memoized) tree.
    """

    def __init__(self, tree: ConceptTree, dictionary: list[str]):
        self.tree = tree
        self.dictionary = dictionary
        n = len(dictionary)
        self.node_idx = np.full(n, -1, dtype=np.int64)
        self.conditional = np.zeros(n, dtype=bool)
        possible_all: set[int] = set()
        aux_free = not tree.aux_columns
        for i, code in enumerate(dictionary):
            if aux_free or self._is_pure(code):
                node = tree.resolve(code)
                self.node_idx[i] = node.index if node is not None else -1
                if node is not None:
                    possible_all.add(node.index)
            else:
                self.conditional[i] = True
                possible_all |= tree.possible_nodes(code)
        self.node_lo = np.where(
            self.node_idx >= 0, tree.dfs_lo[np.maximum(self.node_idx, 0)], -1
        )
        self._possible_los = np.array(
            sorted(int(tree.dfs_lo[i]) for i in possible_all), dtype=np.int64
        )

    def _is_pure(self, code: str) -> bool:
        """True when no MAYBE condition can influence the resolution path."""
        node = self.tree.root
        if node.condition is not None and node.condition.tri(code) != _YES:
            return node.condition.tri(code) == _NO
        while True:
            advanced = False
            for child in node.children:
                state = child.condition.tri(code) if child.condition else _YES
                if state == _MAYBE:
                    return False
                if state == _YES:
                    node = child
                    advanced = True
                    break
            if not advanced:
                return True

    def node_of(self, code_index: int):
        """Resolved node index for a pure code; None if no match; -2 marker
        is never exposed: conditional codes must go through resolve_event."""
        idx = int(self.node_idx[code_index])
        return None if idx < 0 else idx

    def is_conditional(self, code_index: int) -> bool:
        return bool(self.conditional[code_index])

    def resolve_event(self, code_index: int, aux) -> int | None:
        node = self.tree.resolve(self.dictionary[code_index], aux)
        return None if node is None else node.index

    def candidate_los(self) -> np.ndarray:
        return self._possible_los

    def allowed_mask(self, intervals: list[tuple[int, int]]) -> np.ndarray:
        """Per dictionary code: pure code resolves into one of the dfs intervals."""
        mask = np.zeros(len(self.dictionary), dtype=bool)
        for lo, hi in intervals:
            mask |= (self.node_lo >= lo) & (self.node_lo <= hi)
        mask &= ~self.conditional
        return mask


def parse_concept(doc: dict, schemas: dict[str, TableSchema]) -> ConceptTree:
    """Parse a concept descriptor: a root node document plus its connectors."""
    root = _parse_node(doc, "$")
    connectors = [
        parse_connector(c, schemas, f"$.connectors[{i}]")
        for i, c in enumerate(doc.get("connectors") or [])
    ]
    names = [c.name for c in connectors]
    if len(set(names)) != len(names):
        raise ConceptParseError("$.connectors", "duplicate connector names")
    return ConceptTree(root, connectors)
