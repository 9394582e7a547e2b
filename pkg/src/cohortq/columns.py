"""Table schemas, column types and the typed value model.

Values are plain Python objects at the API boundary:

  STRING      str
  INTEGER     int
  DECIMAL     decimal.Decimal, at most 4 fractional digits
  MONEY       decimal.Decimal, at most 2 fractional digits (cents)
  DATE        datetime.date
  DATE_RANGE  (date | None, date | None), None meaning an open side
  BOOLEAN     bool

``None`` is the null value for every type. DECIMAL/MONEY/DATE reduce to
exact integer representations (scaled units / days since 1970-01-01).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, timedelta
from decimal import Decimal, InvalidOperation
from enum import Enum

from .errors import RangeError

_EPOCH_ORDINAL = date(1970, 1, 1).toordinal()
_IDENT_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_.-]*$")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


class ColumnType(str, Enum):
    STRING = "STRING"
    INTEGER = "INTEGER"
    DECIMAL = "DECIMAL"
    MONEY = "MONEY"
    DATE = "DATE"
    DATE_RANGE = "DATE_RANGE"
    BOOLEAN = "BOOLEAN"


DECIMAL_SCALE = 4
MONEY_SCALE = 2

_SCALE = {ColumnType.DECIMAL: 10**DECIMAL_SCALE, ColumnType.MONEY: 10**MONEY_SCALE}


def is_identifier(name: str) -> bool:
    return bool(_IDENT_RE.match(name))


@dataclass(frozen=True)
class Column:
    name: str
    type: ColumnType


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[Column, ...]

    def __post_init__(self):
        if not is_identifier(self.name):
            raise ValueError(f"invalid table name {self.name!r}")
        if not self.columns:
            raise ValueError(f"table {self.name}: at least one column required")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError(f"table {self.name}: duplicate column names")
        for c in self.columns:
            if not is_identifier(c.name):
                raise ValueError(f"table {self.name}: invalid column name {c.name!r}")

    def column(self, name: str) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(f"table {self.name} has no column {name!r}")

    def has_column(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "columns": [{"name": c.name, "type": c.type.value} for c in self.columns],
        }

    @staticmethod
    def from_document(doc: dict) -> "TableSchema":
        cols = tuple(Column(c["name"], ColumnType(c["type"])) for c in doc["columns"])
        return TableSchema(doc["name"], cols)


def day_of(d: date) -> int:
    return d.toordinal() - _EPOCH_ORDINAL


def date_of(day: int) -> date:
    return date.fromordinal(day + _EPOCH_ORDINAL)


def parse_iso_date(text: str) -> date:
    return date.fromisoformat(text)


def quarter_of_day(day: int) -> int:
    """Index of the calendar quarter containing the day: year*4 + (quarter-1)."""
    d = date_of(day)
    return d.year * 4 + (d.month - 1) // 3


def quarter_bounds(qindex: int) -> tuple[int, int]:
    year, q = divmod(qindex, 4)
    first = date(year, q * 3 + 1, 1)
    if q == 3:
        last = date(year, 12, 31)
    else:
        last = date(year, q * 3 + 4, 1) - timedelta(days=1)
    return day_of(first), day_of(last)


def to_scaled(value, ctype: ColumnType) -> int:
    """Exact fixed-point conversion for DECIMAL/MONEY; raises on precision loss."""
    scale = _SCALE[ctype]
    if isinstance(value, bool):
        raise TypeError(f"{ctype.value} value expected, got bool")
    if isinstance(value, int):
        scaled = value * scale
    elif isinstance(value, Decimal):
        scaled = value * scale
        if scaled != int(scaled):
            raise RangeError(f"{value} has more fractional digits than {ctype.value} allows")
        scaled = int(scaled)
    elif isinstance(value, str):
        try:
            return to_scaled(Decimal(value), ctype)
        except InvalidOperation as exc:
            raise TypeError(f"cannot parse {value!r} as {ctype.value}") from exc
    else:
        raise TypeError(f"{ctype.value} value expected, got {type(value).__name__}")
    if not (INT64_MIN <= scaled <= INT64_MAX):
        raise RangeError(f"{value} overflows the {ctype.value} integer representation")
    return scaled


def from_scaled(scaled: int, ctype: ColumnType) -> Decimal:
    return Decimal(scaled) / _SCALE[ctype]


def value_to_int(value, ctype: ColumnType) -> int:
    """Reduce a non-null scalar value to its integer representation."""
    if ctype == ColumnType.INTEGER:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"INTEGER value expected, got {type(value).__name__}")
        if not (INT64_MIN <= value <= INT64_MAX):
            raise RangeError(f"{value} out of 64-bit integer range")
        return value
    if ctype in (ColumnType.DECIMAL, ColumnType.MONEY):
        return to_scaled(value, ctype)
    if ctype == ColumnType.DATE:
        if not isinstance(value, date):
            raise TypeError(f"DATE value expected, got {type(value).__name__}")
        return day_of(value)
    raise TypeError(f"{ctype.value} has no scalar integer representation")


def int_to_value(scaled: int, ctype: ColumnType):
    if ctype == ColumnType.INTEGER:
        return scaled
    if ctype in (ColumnType.DECIMAL, ColumnType.MONEY):
        return from_scaled(scaled, ctype)
    if ctype == ColumnType.DATE:
        return date_of(scaled)
    raise TypeError(f"{ctype.value} has no scalar integer representation")


INT_BACKED = (ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.MONEY, ColumnType.DATE)
NUMERIC = (ColumnType.INTEGER, ColumnType.DECIMAL, ColumnType.MONEY)
