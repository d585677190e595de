"""Durable transactions (undo logging) and the recovery procedure.

A transaction runs prepare (log header, old values, end tag; fence),
mutate (in-place updates; fence), commit (zero the end tag; fence).  A log
entry is complete iff its end tag matches the transaction id; recovery
abandons incomplete logs and undoes complete ones.

Log layout, per fixed-size slot:
  line 0              header: magic4 | nregions4 | txn_id8 | 3x(base8, nlines8)
  lines 1..N          old value of each write-set line, region order
  line N+1            end tag: magic8 | txn_id8 | zeros
Invalidation overwrites the end tag with a zero line.  A write set spans
at most three contiguous regions so the header stays one line.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

from secpmsim.config import LINE, Config
from secpmsim.controller import Controller
from secpmsim.nvm import ZERO_LINE, CrashSnapshot

HEADER_MAGIC = b"SPLG"
END_MAGIC = b"SPLGEND1"
MAX_REGIONS = 3


class Stage(Enum):
    PREPARE = "prepare"
    MUTATE = "mutate"
    COMMIT = "commit"
    DONE = "done"


@dataclass
class TxnDescriptor:
    txn_id: int
    write_set: list[tuple[int, bytes]]
    log_slot: int = 0
    core: int = 0
    stage: Stage = field(default=Stage.PREPARE)

    def regions(self) -> list[tuple[int, int]]:
        """Group the write set into contiguous (base, nlines) runs."""
        runs: list[tuple[int, int]] = []
        for addr, _ in self.write_set:
            if runs and addr == runs[-1][0] + runs[-1][1] * LINE:
                runs[-1] = (runs[-1][0], runs[-1][1] + 1)
            else:
                runs.append((addr, 1))
        if len(runs) > MAX_REGIONS:
            raise ValueError(f"write set spans {len(runs)} regions (max {MAX_REGIONS})")
        return runs


def build_header(txn_id: int, regions: list[tuple[int, int]]) -> bytes:
    padded = regions + [(0, 0)] * (MAX_REGIONS - len(regions))
    flat = [x for pair in padded for x in pair]
    return HEADER_MAGIC + struct.pack(">IQ6Q", len(regions), txn_id, *flat)


def parse_header(raw: bytes) -> tuple[int, list[tuple[int, int]]] | None:
    """Returns (txn_id, regions) or None for a garbage/absent header."""
    if raw[:4] != HEADER_MAGIC:
        return None
    nregions, txn_id, *flat = struct.unpack(">IQ6Q", raw[4:])
    if not 1 <= nregions <= MAX_REGIONS:
        return None
    regions = []
    for i in range(nregions):
        base, nlines = flat[2 * i], flat[2 * i + 1]
        if nlines < 1 or base % LINE != 0:
            return None
        regions.append((base, nlines))
    return txn_id, regions


def build_end_tag(txn_id: int) -> bytes:
    return (END_MAGIC + txn_id.to_bytes(8, "big")).ljust(LINE, b"\0")


def end_tag_matches(raw: bytes, txn_id: int) -> bool:
    return raw == build_end_tag(txn_id)


def run_transaction(controller: Controller, txn: TxnDescriptor) -> Iterator[str]:
    """Execute one durable transaction, yielding after each flush so that
    multiple requesters can interleave at flush granularity."""
    base = controller.log_slot_base(txn.core, txn.log_slot)
    regions = txn.regions()
    total = sum(n for _, n in regions)
    if total != len(txn.write_set):
        raise ValueError("write set lines must match region lines")
    if total > controller.log_slot_lines - 2:
        raise ValueError("write set too large for the configured log slot")

    txn.stage = Stage.PREPARE
    old_values = [controller.handle_read(addr) for addr, _ in txn.write_set]
    controller.handle_flush(base, build_header(txn.txn_id, regions))
    yield "log_header"
    for i, old in enumerate(old_values):
        controller.handle_flush(base + (1 + i) * LINE, old)
        yield "log_old"
    end_addr = base + (1 + total) * LINE
    controller.handle_flush(end_addr, build_end_tag(txn.txn_id))
    yield "log_end"
    controller.fence()

    txn.stage = Stage.MUTATE
    for addr, payload in txn.write_set:
        controller.handle_flush(addr, payload)
        yield "data"
    controller.fence()

    txn.stage = Stage.COMMIT
    controller.handle_flush(end_addr, ZERO_LINE)
    yield "invalidate"
    controller.fence()
    txn.stage = Stage.DONE


def execute(controller: Controller, txn: TxnDescriptor) -> float:
    for _ in run_transaction(controller, txn):
        pass
    return controller.clock


def recover(snapshot: CrashSnapshot, cfg: Config) -> tuple[Controller, list[int]]:
    """Rebuild a controller over the durable image, finish any in-flight
    page re-encryption, then scan the log region and undo complete logs."""
    ctrl = Controller.from_snapshot(cfg, snapshot)
    undone: list[int] = []
    for core in range(cfg.cores):
        for slot in range(cfg.log_slots):
            base = ctrl.log_slot_base(core, slot)
            parsed = parse_header(ctrl.handle_read(base))
            if parsed is None:
                continue
            txn_id, regions = parsed
            total = sum(n for _, n in regions)
            if total > ctrl.log_slot_lines - 2:
                continue
            end_addr = base + (1 + total) * LINE
            if not end_tag_matches(ctrl.handle_read(end_addr), txn_id):
                continue  # incomplete log: abandon
            idx = 1
            for rbase, nlines in regions:
                for j in range(nlines):
                    old = ctrl.handle_read(base + idx * LINE)
                    idx += 1
                    ctrl.handle_flush(rbase + j * LINE, old)
            ctrl.fence()
            ctrl.handle_flush(end_addr, ZERO_LINE)
            ctrl.fence()
            undone.append(txn_id)
    ctrl.drain_all()
    return ctrl, undone
