"""Persistent storage array with per-bank occupancy timing.

The store is sparse (touched lines only) over a 16 GiB logical space.
Banks are line-interleaved: bank = (address / 64) mod nbanks.  A write
occupies its bank for tWR; a read waits for the bank and then costs
tRCD + tCL.  A crash snapshot is the store with all queued entries applied
in FIFO order (the ADR guarantee) plus the 20-byte re-encryption status
register image.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, BinaryIO

from secpmsim.config import LINE, Timing

if TYPE_CHECKING:
    from secpmsim.write_queue import WriteQueue

ZERO_LINE = bytes(LINE)


class NvmDevice:
    def __init__(self, timing: Timing | None = None, banks: int = 16,
                 capacity: int = 16 << 30):
        self.timing = timing if timing is not None else Timing()
        self.nbanks = banks
        self.capacity = capacity
        self.busy_until = [0.0] * banks
        self.store: dict[int, bytes] = {}
        self.writes = 0
        self.reads = 0

    def bank(self, address: int) -> int:
        return (address // LINE) % self.nbanks

    def bank_free_at(self, address: int) -> float:
        return self.busy_until[self.bank(address)]

    def nvm_write(self, address: int, payload: bytes, now: float) -> float:
        """Issue a line write on a free bank; returns completion time."""
        b = self.bank(address)
        if self.busy_until[b] > now:
            raise RuntimeError("write issued to a busy bank")
        done = now + self.timing.t_wr_ns
        self.busy_until[b] = done
        self.store[address] = payload
        self.writes += 1
        return done

    def nvm_read(self, address: int, now: float) -> tuple[bytes, float]:
        """Read a line, waiting out any in-flight write on the bank."""
        b = self.bank(address)
        start = max(now, self.busy_until[b])
        done = start + self.timing.read_ns
        self.busy_until[b] = done
        self.reads += 1
        return self.store.get(address, ZERO_LINE), done

    def peek(self, address: int) -> bytes:
        """Zero-cost inspection for reporting and verification."""
        return self.store.get(address, ZERO_LINE)

    def dump(self, fh: BinaryIO) -> None:
        """Flat binary of (little-endian u64 address, 64-byte payload)."""
        for address in sorted(self.store):
            fh.write(address.to_bytes(8, "little"))
            fh.write(self.store[address])

    def load(self, fh: BinaryIO) -> None:
        self.store.clear()
        while True:
            head = fh.read(8)
            if not head:
                break
            payload = fh.read(LINE)
            if len(head) != 8 or len(payload) != LINE:
                raise ValueError("truncated snapshot record")
            self.store[int.from_bytes(head, "little")] = payload


@dataclass
class CrashSnapshot:
    """Durable image at a crash: NVM store + ADR-applied queue + RSR.

    Holds no CPU-cache, counter-cache, or staging-register state; those
    are volatile by design.
    """

    store: dict[int, bytes]
    rsr_image: bytes = bytes(20)
    rsr_active: bool = False
    timestamp: float = 0.0
    queue_depth: int = 0

    def line(self, address: int) -> bytes:
        return self.store.get(address, ZERO_LINE)


def take_crash_snapshot(device: NvmDevice, queue: "WriteQueue",
                        rsr_image: bytes = bytes(20), rsr_active: bool = False,
                        now: float = 0.0) -> CrashSnapshot:
    store = dict(device.store)
    for entry in queue.entries:  # FIFO order: later entries overwrite
        store[entry.address] = entry.payload
    if len(rsr_image) != 20:
        raise ValueError("RSR image must be 20 bytes")
    return CrashSnapshot(store, rsr_image, rsr_active, now, len(queue.entries))
