"""Memory-controller state machine.

Orders every flush as: locate counter -> bump minor -> encrypt -> write the
counter through the cache -> stage counter+data in the two-line register ->
append both to the write queue in one indivisible step -> ack.  Reads
overlap pad generation with the NVM access.  Minor-counter overflow
triggers a page re-encryption tracked by a 20-byte status register that is
battery-persisted on crash so recovery can finish the page.

Timing is coarse event-driven on a single global clock: each operation
advances the clock by its configured latency, and appends stall (draining
the queue against per-bank occupancy) when the queue is full.  Crash
boundaries are announced through ``boundary_hook`` after every
durability-relevant state change.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from secpmsim.config import LINE, LINES_PER_PAGE, PAGE, Config, default_footprint
from secpmsim.counters import (
    AddressError,
    CounterAddressMap,
    CounterCache,
    CounterLine,
    OverflowSignal,
    increment_minor,
)
from secpmsim.crypto import OtpEngine, decrypt_line, encrypt_line
from secpmsim.nvm import CrashSnapshot, NvmDevice, take_crash_snapshot
from secpmsim.write_queue import (
    Origin,
    StagingRegister,
    WriteQueue,
    WriteQueueEntry,
)

COUNTER_REGION_BASE = 1 << 40


class Mode(Enum):
    UNSEC_PM = "unsec-pm"
    SECPM_NO_CWT = "secpm-no-cwt"
    SECPM_NO_CWR = "secpm-no-cwr"
    SECPM = "secpm"

    @property
    def encrypted(self) -> bool:
        return self is not Mode.UNSEC_PM

    @property
    def write_through(self) -> bool:
        return self in (Mode.SECPM_NO_CWR, Mode.SECPM)

    @property
    def cwr(self) -> bool:
        return self is Mode.SECPM


@dataclass
class Rsr:
    """Re-encryption status register: page, old major, 64 done bits."""

    page_number: int = 0
    old_major: int = 0
    done_bits: int = 0
    active: bool = False

    def done(self, i: int) -> bool:
        return bool(self.done_bits >> i & 1)

    def set_done(self, i: int) -> None:
        self.done_bits |= 1 << i

    def serialize(self) -> bytes:
        return (
            self.page_number.to_bytes(4, "big")
            + self.old_major.to_bytes(8, "big")
            + self.done_bits.to_bytes(8, "big")
        )

    @classmethod
    def deserialize(cls, raw: bytes, active: bool = True) -> "Rsr":
        if len(raw) != 20:
            raise ValueError("RSR image must be 20 bytes")
        return cls(
            page_number=int.from_bytes(raw[:4], "big"),
            old_major=int.from_bytes(raw[4:12], "big"),
            done_bits=int.from_bytes(raw[12:20], "big"),
            active=active,
        )


def derive_key(seed: int) -> bytes:
    return hashlib.sha256(b"secpmsim-key-%d" % seed).digest()[:16]


class Controller:
    def __init__(self, cfg: Config, log_lines: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.mode = Mode(cfg.mode)
        self.otp = OtpEngine(derive_key(cfg.seed))

        footprint = cfg.footprint or default_footprint(cfg.workload)
        # Log area sits right above the workload footprint; both are data
        # region addresses and share the counter layout.
        self.log_base = -(-footprint // PAGE) * PAGE
        slot_lines = cfg.txn_size // LINE + 2
        log_bytes = cfg.cores * cfg.log_slots * slot_lines * LINE
        region_end = self.log_base + (-(-log_bytes // PAGE) * PAGE)
        self.map = CounterAddressMap(
            counter_region_base=COUNTER_REGION_BASE,
            data_region_span=region_end // PAGE,
        )
        self.log_slot_lines = slot_lines

        self.nvm = NvmDevice(cfg.timing, banks=cfg.banks, capacity=cfg.capacity)
        self.cache = CounterCache(cfg.cache_size, cfg.cache_ways)
        self.queue = WriteQueue(cfg.queue_len, cwr_enabled=self.mode.cwr)
        self.register = StagingRegister()
        self.rsr = Rsr()
        self.clock = 0.0
        self.reencryptions = 0
        self.flushes = 0
        self.otp_reuse = 0
        self._enc_tuples: set[tuple[int, int]] = set()
        self.boundary_hook: Optional[Callable[[str], None]] = None

    # ------------------------------------------------------------------
    # plumbing

    def log_slot_base(self, core: int, slot: int) -> int:
        index = core * self.cfg.log_slots + slot
        return self.log_base + index * self.log_slot_lines * LINE

    def _boundary(self, label: str) -> None:
        if self.boundary_hook is not None:
            self.boundary_hook(label)

    def _queue_forward(self, address: int) -> bytes | None:
        for entry in reversed(self.queue.entries):
            if entry.address == address:
                return entry.payload
        return None

    def _read_line_raw(self, address: int, t: float) -> tuple[bytes, float]:
        forwarded = self._queue_forward(address)
        if forwarded is not None:
            return forwarded, t + self.cfg.timing.read_ns
        return self.nvm.nvm_read(address, t)

    def _drain_step(self, t: float) -> float:
        ready = self.queue.head_ready_at(self.nvm)
        assert ready is not None
        t = max(t, ready)
        entry = self.queue.drain_one(self.nvm, t)
        assert entry is not None
        self._boundary("drain")
        return t

    def _ensure_space(self, n: int, t: float) -> float:
        """Backpressure: when the queue cannot take n entries, drain down
        to the low watermark (half capacity), charging the wait time."""
        if self.queue.free_slots >= n:
            return t
        target = min(self.cfg.queue_len - n, self.cfg.queue_len // 2)
        while len(self.queue) > target:
            t = self._drain_step(t)
        return t

    def idle_drain(self, duration: float) -> float:
        """Let the queue drain in the background for ``duration`` ns of
        CPU compute time (e.g. between transactions)."""
        end = self.clock + duration
        t = self.clock
        while self.queue.entries:
            ready = self.queue.head_ready_at(self.nvm)
            assert ready is not None
            issue = max(t, ready)
            if issue > end:
                break
            self.queue.drain_one(self.nvm, issue)
            self._boundary("drain")
            t = issue
        self.clock = end
        return end

    def drain_all(self) -> float:
        t = self.clock
        while self.queue.entries:
            t = self._drain_step(t)
        self.clock = max(self.clock, t)
        return self.clock

    def _pad_for_encrypt(self, address: int, ctr: int) -> bytes:
        key = (address, ctr)
        if key in self._enc_tuples:
            self.otp_reuse += 1
        else:
            self._enc_tuples.add(key)
        return self.otp.generate(address, ctr)

    def _get_counter_line(self, cline: int, t: float) -> tuple[CounterLine, float]:
        line = self.cache.lookup(cline)
        if line is not None:
            return line, t + self.cfg.cache_hit_ns
        payload, t = self._read_line_raw(cline, t)
        line = CounterLine.deserialize(payload)
        t = self._insert_counter(cline, line, dirty=False, t=t)
        return line, t

    def _insert_counter(self, cline: int, line: CounterLine, dirty: bool,
                        t: float) -> float:
        victim = self.cache.insert(cline, line, dirty=dirty)
        if victim is not None:
            # Write-back eviction (only reachable without write-through).
            vaddr, vline = victim
            t = self._ensure_space(1, t)
            self.queue.append(
                WriteQueueEntry(vaddr, vline.serialize(), Origin.COUNTER, t)
            )
            self._boundary("append")
        return t

    # ------------------------------------------------------------------
    # flush / read / fence

    def handle_flush(self, address: int, plaintext: bytes, now: float | None = None,
                     ) -> float:
        """Run the full flush sequence; returns the ack (retire) time."""
        if len(plaintext) != LINE:
            raise ValueError("line payload must be 64 bytes")
        t = (self.clock if now is None else now) + self.cfg.flush_overhead_ns
        self.flushes += 1

        if not self.mode.encrypted:
            t = self._ensure_space(1, t)
            self.queue.append(WriteQueueEntry(address, plaintext, Origin.DATA, t))
            self._boundary("append")
            self.clock = t
            return t

        cline, minor_index = self.map.locate(address)
        line, t = self._get_counter_line(cline, t)
        try:
            new_line = increment_minor(line, minor_index)
        except OverflowSignal:
            t = self.reencrypt_page(self.map.page_of(address), t)
            line, t = self._get_counter_line(cline, t)
            new_line = increment_minor(line, minor_index)

        ctr = new_line.counter_value(minor_index)
        pad = self._pad_for_encrypt(address, ctr)
        t += self.cfg.timing.aes_ns
        cipher = encrypt_line(plaintext, pad)

        if not self.mode.write_through:
            # Broken baseline: the counter stays dirty in the cache and
            # only the data entry becomes durable.
            t = self._insert_counter(cline, new_line, dirty=True, t=t)
            t = self._ensure_space(1, t)
            self.queue.append(WriteQueueEntry(address, cipher, Origin.DATA, t))
            self._boundary("append")
        else:
            t = self._insert_counter(cline, new_line, dirty=False, t=t)
            if self.cfg.use_register:
                self.register.store_counter(cline, new_line.serialize())
                self._boundary("reg_store")
                self.register.store_data(address, cipher)
                self._boundary("reg_store")
                t = self._ensure_space(2, t)
                self.queue.atomic_append_pair(self.register, t)
                self._boundary("append_pair")
            else:
                t = self._ensure_space(1, t)
                self.queue.append(
                    WriteQueueEntry(cline, new_line.serialize(), Origin.COUNTER, t)
                )
                self._boundary("append")
                t = self._ensure_space(1, t)
                self.queue.append(WriteQueueEntry(address, cipher, Origin.DATA, t))
                self._boundary("append")

        self.clock = t
        return t

    def handle_read(self, address: int, now: float | None = None) -> bytes:
        """Decrypting read; pad generation overlaps the NVM access."""
        t0 = self.clock if now is None else now
        if not self.mode.encrypted:
            payload, t = self._read_line_raw(address, t0)
            self.clock = t
            return payload

        cline, minor_index = self.map.locate(address)
        line, t_ctr = self._get_counter_line(cline, t0)
        if (
            self.rsr.active
            and self.map.page_of(address) == self.rsr.page_number
            and not self.rsr.done(minor_index)
        ):
            # Not yet re-encrypted: the durable line still carries the old
            # minor; the old major lives in the status register.
            ctr = (self.rsr.old_major << 7) | line.minors[minor_index]
        else:
            ctr = line.counter_value(minor_index)
        pad = self.otp.generate(address, ctr)
        cipher, t_data = self._read_line_raw(address, t0)
        t = max(t_data, t_ctr + self.cfg.timing.aes_ns)
        self.clock = t
        return decrypt_line(cipher, pad)

    def fence(self) -> float:
        """All prior flushes are acked (queued = durable) by construction."""
        self._boundary("fence")
        return self.clock

    def flush_counter_cache(self) -> float:
        """Push every dirty counter line to the queue (write-back modes
        only; a clean-shutdown aid so runs start from a consistent NVM)."""
        t = self.clock
        for addr, line in self.cache.dirty_entries():
            t = self._ensure_space(1, t)
            self.queue.append(
                WriteQueueEntry(addr, line.serialize(), Origin.COUNTER, t)
            )
            self.cache.mark_clean(addr)
            self._boundary("append")
        self.clock = t
        return t

    # ------------------------------------------------------------------
    # page re-encryption

    def reencrypt_page(self, page: int, now: float | None = None) -> float:
        if self.rsr.active:
            raise RuntimeError("a page re-encryption is already in flight")
        t = self.clock if now is None else now
        cline = self.map.counter_line_address(page)
        old_line, t = self._get_counter_line(cline, t)
        self.rsr = Rsr(page_number=page, old_major=old_line.major, active=True)
        self._boundary("rsr_arm")
        hybrid = old_line.copy()
        hybrid.major += 1
        t = self._reencrypt_lines(page, old_line.major, list(old_line.minors),
                                  hybrid, t)
        self.clock = t
        return t

    def resume_reencryption(self, rsr: Rsr, now: float | None = None) -> float:
        """Finish an interrupted re-encryption from the persisted register.

        Old minors for not-yet-done lines come from the durable counter
        line, which keeps them until each line's own counter write lands.
        """
        t = self.clock if now is None else now
        self.rsr = rsr
        cline = self.map.counter_line_address(rsr.page_number)
        durable, t = self._get_counter_line(cline, t)
        hybrid = durable.copy()
        hybrid.major = rsr.old_major + 1
        t = self._reencrypt_lines(rsr.page_number, rsr.old_major,
                                  list(durable.minors), hybrid, t)
        self.clock = t
        return t

    def _reencrypt_lines(self, page: int, old_major: int, old_minors: list[int],
                         hybrid: CounterLine, t: float) -> float:
        cline = self.map.counter_line_address(page)
        new_major = hybrid.major
        for i in range(LINES_PER_PAGE):
            if self.rsr.done(i):
                continue
            address = page * PAGE + i * LINE
            cipher, t = self._read_line_raw(address, t)
            old_ctr = (old_major << 7) | old_minors[i]
            plain = decrypt_line(cipher, self.otp.generate(address, old_ctr))
            hybrid.minors[i] = 0
            new_ctr = new_major << 7
            recipher = encrypt_line(plain, self._pad_for_encrypt(address, new_ctr))
            t += self.cfg.timing.aes_ns
            t = self._insert_counter(cline, hybrid.copy(), dirty=False, t=t)
            # The queue append and the done-bit update are one controller
            # action: no crash point separates them.
            self.register.store_counter(cline, hybrid.serialize())
            self.register.store_data(address, recipher)
            t = self._ensure_space(2, t)
            self.queue.atomic_append_pair(self.register, t)
            self.rsr.set_done(i)
            self._boundary("reencrypt_line")
        self.rsr.active = False
        self._boundary("rsr_done")
        self.reencryptions += 1
        return t

    # ------------------------------------------------------------------
    # crash handling

    def snapshot(self) -> CrashSnapshot:
        return take_crash_snapshot(
            self.nvm, self.queue,
            rsr_image=self.rsr.serialize(), rsr_active=self.rsr.active,
            now=self.clock,
        )

    @classmethod
    def from_snapshot(cls, cfg: Config, snap: CrashSnapshot) -> "Controller":
        ctrl = cls(cfg)
        ctrl.nvm.store = dict(snap.store)
        if snap.rsr_active:
            ctrl.resume_reencryption(Rsr.deserialize(snap.rsr_image))
        return ctrl
