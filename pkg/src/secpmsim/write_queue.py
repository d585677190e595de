"""Battery-backed (ADR) write queue with counter-write merging.

Entries carry a one-bit origin flag distinguishing data lines from counter
lines.  With merging enabled, an incoming counter entry removes the
co-resident counter entry for the same address: write-through ordering
guarantees the later counter line subsumes every earlier minor update, so
nothing is lost.  Data entries are never merged.  Draining is strict FIFO;
the head entry is only issued when its target bank is free.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from secpmsim.counters import CounterLine
    from secpmsim.nvm import NvmDevice


class Origin(Enum):
    DATA = "data"
    COUNTER = "counter"


@dataclass(eq=False)
class WriteQueueEntry:
    address: int
    payload: bytes
    origin: Origin
    enqueue_time: float = 0.0


@dataclass
class StagingRegister:
    """Two-line volatile buffer; contents are lost on crash."""

    data_slot: Optional[tuple[int, bytes]] = None
    counter_slot: Optional[tuple[int, bytes]] = None

    def store_counter(self, address: int, payload: bytes) -> None:
        self.counter_slot = (address, payload)

    def store_data(self, address: int, payload: bytes) -> None:
        self.data_slot = (address, payload)

    def clear(self) -> None:
        self.data_slot = None
        self.counter_slot = None


class WriteQueue:
    def __init__(self, capacity: int = 32, cwr_enabled: bool = False):
        self.capacity = capacity
        self.cwr_enabled = cwr_enabled
        self.entries: deque[WriteQueueEntry] = deque()
        self.appended_data = 0
        self.appended_counter = 0
        self.merged = 0
        self.drained = 0

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def free_slots(self) -> int:
        return self.capacity - len(self.entries)

    def cwr_merge(self, incoming: WriteQueueEntry) -> int:
        """Remove the resident counter entry matching the incoming address.

        Only counter-flagged entries are scanned; the no-two-counters-per-
        address invariant bounds removals to one.
        """
        if incoming.origin is not Origin.COUNTER:
            raise ValueError("merge applies to counter entries only")
        for entry in self.entries:
            if entry.origin is Origin.COUNTER and entry.address == incoming.address:
                self.entries.remove(entry)
                self.merged += 1
                return 1
        return 0

    def append(self, entry: WriteQueueEntry) -> None:
        if self.free_slots < 1:
            raise RuntimeError("append on a full queue; caller must stall")
        if entry.origin is Origin.COUNTER:
            self.appended_counter += 1
            if self.cwr_enabled:
                self.cwr_merge(entry)
        else:
            self.appended_data += 1
        self.entries.append(entry)

    def atomic_append_pair(self, register: StagingRegister, now: float = 0.0) -> None:
        """Move the staged counter+data pair into the queue indivisibly.

        The caller guarantees two free slots; no crash point may be
        introduced between the two appends.
        """
        if register.counter_slot is None or register.data_slot is None:
            raise ValueError("staging register must hold both lines")
        if self.free_slots < 2:
            raise RuntimeError("need two free slots for an atomic pair")
        caddr, cpayload = register.counter_slot
        daddr, dpayload = register.data_slot
        self.append(WriteQueueEntry(caddr, cpayload, Origin.COUNTER, now))
        self.append(WriteQueueEntry(daddr, dpayload, Origin.DATA, now))
        register.clear()

    def head_ready_at(self, nvm: "NvmDevice") -> float | None:
        if not self.entries:
            return None
        return nvm.bank_free_at(self.entries[0].address)

    def drain_one(self, nvm: "NvmDevice", now: float) -> WriteQueueEntry | None:
        """Issue the head entry if its bank is free at `now` (FIFO only)."""
        if not self.entries:
            return None
        head = self.entries[0]
        if nvm.bank_free_at(head.address) > now:
            return None
        self.entries.popleft()
        nvm.nvm_write(head.address, head.payload, now)
        self.drained += 1
        return head


def counter_entry(address: int, line: "CounterLine", now: float = 0.0) -> WriteQueueEntry:
    return WriteQueueEntry(address, line.serialize(), Origin.COUNTER, now)
