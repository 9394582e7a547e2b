"""Sets of disjoint, coalesced, inclusive date ranges over day numbers.

Days count from 1970-01-01. A ``None`` bound means the range is open on that
side. Adjacent ranges (gap of zero days) are always merged, so every DateSet
has one canonical form.
"""

from __future__ import annotations

from .columns import date_of, day_of, parse_iso_date

# sentinels keep the merge arithmetic branch-free; +/-1 never overflows them
_NEG = -(1 << 62)
_POS = 1 << 62


def _seal(lo, hi):
    return (_NEG if lo is None else lo, _POS if hi is None else hi)


def _open(lo: int, hi: int):
    return (None if lo <= _NEG else lo, None if hi >= _POS else hi)


class DateSet:
    """Immutable ordered set of disjoint inclusive day ranges."""

    __slots__ = ("_ranges",)

    def __init__(self, ranges=()):
        self._ranges = _normalize(ranges)

    @classmethod
    def _wrap(cls, sealed: tuple) -> "DateSet":
        ds = object.__new__(cls)
        ds._ranges = sealed
        return ds

    @property
    def ranges(self) -> list[tuple[int | None, int | None]]:
        return [_open(lo, hi) for lo, hi in self._ranges]

    def is_empty(self) -> bool:
        return not self._ranges

    def contains(self, day: int) -> bool:
        return any(lo <= day <= hi for lo, hi in self._ranges)

    def __eq__(self, other):
        return isinstance(other, DateSet) and self._ranges == other._ranges

    def __hash__(self):
        return hash(self._ranges)

    def __bool__(self):
        return bool(self._ranges)

    def __repr__(self):
        return f"DateSet({self.ranges!r})"

    def union(self, other: "DateSet") -> "DateSet":
        if not self._ranges:
            return other
        if not other._ranges:
            return self
        return DateSet._wrap(_normalize_sealed(list(self._ranges) + list(other._ranges)))

    def intersect(self, other: "DateSet") -> "DateSet":
        out = []
        a, b = self._ranges, other._ranges
        i = j = 0
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return DateSet._wrap(tuple(out))

    def mask(self, lo: int | None, hi: int | None) -> "DateSet":
        """Restrict to the inclusive window [lo, hi] (None = unbounded side)."""
        window = DateSet._wrap((_seal(lo, hi),))
        return self.intersect(window)

    def to_document(self) -> list:
        return [[lo, hi] for lo, hi in self.ranges]

    @staticmethod
    def from_document(doc) -> "DateSet":
        return DateSet([(lo, hi) for lo, hi in doc])

    def render(self) -> str:
        """Braced range list: ``{2015-07-16/2015-07-16, 2015-12-04/2015-12-04}``."""
        parts = []
        for lo, hi in self.ranges:
            a = "" if lo is None else date_of(lo).isoformat()
            b = "" if hi is None else date_of(hi).isoformat()
            parts.append(f"{a}/{b}")
        return "{" + ", ".join(parts) + "}"

    @staticmethod
    def parse(text: str) -> "DateSet":
        text = text.strip()
        if not (text.startswith("{") and text.endswith("}")):
            raise ValueError(f"not a date set: {text!r}")
        inner = text[1:-1].strip()
        if not inner:
            return DateSet()
        ranges = []
        for part in inner.split(","):
            a, b = part.strip().split("/")
            lo = day_of(parse_iso_date(a)) if a else None
            hi = day_of(parse_iso_date(b)) if b else None
            ranges.append((lo, hi))
        return DateSet(ranges)


def _normalize(ranges) -> tuple:
    sealed = []
    for lo, hi in ranges:
        s = _seal(lo, hi)
        if s[0] > s[1]:
            raise ValueError(f"range min after max: {(lo, hi)}")
        sealed.append(s)
    return _normalize_sealed(sealed)


def _normalize_sealed(sealed: list) -> tuple:
    if not sealed:
        return ()
    sealed.sort()
    out = [sealed[0]]
    for lo, hi in sealed[1:]:
        clo, chi = out[-1]
        if lo <= chi + 1:
            if hi > chi:
                out[-1] = (clo, hi)
        else:
            out.append((lo, hi))
    return tuple(out)


EMPTY = DateSet()
