"""Split-counter storage: one 64-byte counter line per 4 KiB page.

A counter line packs a 64-bit major counter and 64 seven-bit minor
counters (64 + 64*7 = 512 bits).  Line i of a page is encrypted with
``major || minors[i]``.  The counter cache is set-associative with LRU
replacement per set; under write-through operation every cached line is
clean, so evictions drop silently.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

from secpmsim.config import LINE, LINES_PER_PAGE, PAGE

MINOR_MAX = 127  # 7-bit minors


class AddressError(Exception):
    """Address outside the mapped data region."""


class OverflowSignal(Exception):
    """A minor counter hit 127; the page must be re-encrypted."""

    def __init__(self, minor_index: int):
        super().__init__(f"minor counter {minor_index} overflow")
        self.minor_index = minor_index


@dataclass
class CounterLine:
    major: int = 0
    minors: list[int] = field(default_factory=lambda: [0] * LINES_PER_PAGE)

    def copy(self) -> "CounterLine":
        return CounterLine(self.major, list(self.minors))

    def counter_value(self, minor_index: int) -> int:
        """71-bit concatenation major || minor used for encryption."""
        return (self.major << 7) | self.minors[minor_index]

    def serialize(self) -> bytes:
        packed = 0
        for m in self.minors:
            if m & ~MINOR_MAX:  # nonzero iff m < 0 or m > 127
                raise ValueError("minor counter out of 7-bit range")
            packed = (packed << 7) | m
        return self.major.to_bytes(8, "big") + packed.to_bytes(56, "big")

    @classmethod
    def deserialize(cls, raw: bytes) -> "CounterLine":
        if len(raw) != LINE:
            raise ValueError("counter line must be 64 bytes")
        major = int.from_bytes(raw[:8], "big")
        packed = int.from_bytes(raw[8:], "big")
        minors = [0] * LINES_PER_PAGE
        for i in range(LINES_PER_PAGE - 1, -1, -1):
            minors[i] = packed & MINOR_MAX
            packed >>= 7
        return cls(major, minors)


def increment_minor(line: CounterLine, minor_index: int) -> CounterLine:
    """Return a copy with one minor bumped; raise OverflowSignal at 127."""
    if not 0 <= minor_index < LINES_PER_PAGE:
        raise ValueError("minor index out of range")
    if line.minors[minor_index] >= MINOR_MAX:
        raise OverflowSignal(minor_index)
    out = line.copy()
    out.minors[minor_index] += 1
    return out


@dataclass(frozen=True)
class CounterAddressMap:
    """Places the counter line of page p at counter_region_base + 64*p."""

    counter_region_base: int
    data_region_span: int  # pages

    def locate(self, data_line_address: int) -> tuple[int, int]:
        if data_line_address % LINE != 0:
            raise AddressError(f"address {data_line_address:#x} not line-aligned")
        page, offset = divmod(data_line_address, PAGE)
        if not 0 <= page < self.data_region_span:
            raise AddressError(f"address {data_line_address:#x} outside data region")
        return self.counter_region_base + LINE * page, offset // LINE

    def page_of(self, data_line_address: int) -> int:
        return data_line_address // PAGE

    def counter_line_address(self, page: int) -> int:
        return self.counter_region_base + LINE * page

    def is_counter_address(self, address: int) -> bool:
        return address >= self.counter_region_base


class CounterCache:
    """Set-associative LRU cache of counter lines, 64 B per entry."""

    def __init__(self, capacity_bytes: int, ways: int = 8):
        entries = capacity_bytes // LINE
        if entries < ways:
            raise ValueError("cache smaller than one set")
        self.ways = ways
        self.nsets = entries // ways
        # addr -> (CounterLine, dirty); insertion order is recency order
        self._sets: list[OrderedDict[int, tuple[CounterLine, bool]]] = [
            OrderedDict() for _ in range(self.nsets)
        ]
        self.hits = 0
        self.misses = 0

    def _set(self, address: int) -> OrderedDict:
        return self._sets[(address // LINE) % self.nsets]

    def lookup(self, address: int) -> CounterLine | None:
        s = self._set(address)
        hit = s.get(address)
        if hit is None:
            self.misses += 1
            return None
        s.move_to_end(address)
        self.hits += 1
        return hit[0]

    def insert(
        self, address: int, line: CounterLine, dirty: bool = False
    ) -> tuple[int, CounterLine] | None:
        """Install/replace an entry; returns an evicted dirty line, if any."""
        s = self._set(address)
        if address in s:
            s[address] = (line, dirty)
            s.move_to_end(address)
            return None
        victim = None
        if len(s) >= self.ways:
            vaddr, (vline, vdirty) = s.popitem(last=False)
            if vdirty:
                victim = (vaddr, vline)
        s[address] = (line, dirty)
        return victim

    def dirty_entries(self) -> list[tuple[int, CounterLine]]:
        out = []
        for s in self._sets:
            out.extend((a, line) for a, (line, d) in s.items() if d)
        return out

    def mark_clean(self, address: int) -> None:
        s = self._set(address)
        if address in s:
            line, _ = s[address]
            s[address] = (line, False)

    def clear(self) -> None:
        for s in self._sets:
            s.clear()

    @property
    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0
