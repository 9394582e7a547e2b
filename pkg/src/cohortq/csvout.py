"""CSV rendering of query results.

Default separator is ";" (configurable). Cells: date sets render as
``{min/max, min/max}`` with ISO dates and empty strings for open sides,
string lists as ``[a, b]``, booleans as ``true``/``false``, absent values
as ``-``. Rows are sorted by entity id (numeric ids in numeric order), then
by the secondary key value.
"""

from __future__ import annotations

from decimal import Decimal

from .dateset import DateSet
from .engine.evaluate import ResultLine
from .querymodel import HeaderColumn

DEFAULT_SEPARATOR = ";"


def render_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, DateSet):
        return value.render()
    if isinstance(value, list):
        return "[" + ", ".join(str(v) for v in value) + "]"
    if isinstance(value, Decimal):
        return format(value.normalize(), "f")
    return str(value)


def entity_sort_key(entity: str):
    """Numeric ids sort numerically (1, 2, ..., 10), others lexicographically."""
    if entity.isdigit():
        return (0, int(entity), "")
    return (1, 0, entity)


def _line_sort_key(line: ResultLine):
    secondary = line.secondary
    return (entity_sort_key(line.entity), secondary is None, secondary or "")


def _escape(cell: str, sep: str) -> str:
    if sep in cell or '"' in cell or "\n" in cell:
        return '"' + cell.replace('"', '""') + '"'
    return cell


def render_csv(
    header: list[HeaderColumn], lines: list[ResultLine], separator: str = DEFAULT_SEPARATOR
) -> bytes:
    """UTF-8 CSV: header row, then one row per result line."""
    out = [separator.join(_escape(c.label, separator) for c in header)]
    has_secondary = any(c.key == "secondary" for c in header)
    for line in sorted(lines, key=_line_sort_key):
        cells = [line.entity]
        if has_secondary:
            cells.append(render_cell(line.secondary))
        cells.append(render_cell(line.dates))
        cells.extend(render_cell(v) for v in line.values)
        out.append(separator.join(_escape(c, separator) for c in cells))
    return ("\n".join(out) + "\n").encode("utf-8")
