"""Transaction-stream generators for the five evaluation workloads.

Each generator is a pure function of its spec (same seed, same stream) and
emits write sets of exactly ``txn_size`` bytes of line-aligned data inside
the workload footprint.  Structural addresses come from small host-side
shadow structures so the streams carry the locality each structure really
has: queue and B-tree traffic is clustered, while array swaps, hash-table
buckets, and red-black-tree nodes scatter across the footprint.
"""

from __future__ import annotations

import hashlib
import random
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, TextIO

from secpmsim.config import LINE, PAGE, Config, default_footprint
from secpmsim.txn import TxnDescriptor

BTREE_NODE = PAGE          # one node per page
HASH_BUCKET_ITEMS = 4      # items per bucket


def _seed_int(*parts: object) -> int:
    # Stable across processes (unlike hash() of strings).
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    txn_size: int = 1024
    txn_count: int = 1000
    seed: int = 0
    footprint: int = 0      # 0 = workload default
    log_slots: int = 64
    core: int = 0

    @classmethod
    def from_config(cls, cfg: Config, core: int = 0, seed: int | None = None
                    ) -> "WorkloadSpec":
        return cls(
            kind=cfg.workload,
            txn_size=cfg.txn_size,
            txn_count=cfg.txn_count,
            seed=cfg.seed if seed is None else seed,
            footprint=cfg.footprint or default_footprint(cfg.workload),
            log_slots=cfg.log_slots,
            core=core,
        )


def _lines(rng: random.Random, regions: list[tuple[int, int]]
           ) -> list[tuple[int, bytes]]:
    out = []
    for base, nlines in regions:
        for i in range(nlines):
            out.append((base + i * LINE, rng.randbytes(LINE)))
    return out


def _array_regions(spec: WorkloadSpec, rng: random.Random
                   ) -> Iterable[list[tuple[int, int]]]:
    total_lines = spec.txn_size // LINE
    if total_lines == 1:
        slots = spec.footprint // LINE
        for _ in range(spec.txn_count):
            yield [(rng.randrange(slots) * LINE, 1)]
        return
    half = total_lines // 2
    entries = spec.footprint // (half * LINE)
    for _ in range(spec.txn_count):
        a = rng.randrange(entries)
        b = rng.randrange(entries)
        while b == a:
            b = rng.randrange(entries)
        regions = [(a * half * LINE, half), (b * half * LINE, half)]
        if total_lines % 2:  # odd line count: widen the first entry
            regions[0] = (regions[0][0], half + 1)
        yield sorted(regions)


def _queue_regions(spec: WorkloadSpec, rng: random.Random
                   ) -> Iterable[list[tuple[int, int]]]:
    nlines = spec.txn_size // LINE
    head = 0
    tail = spec.footprint // 2
    for _ in range(spec.txn_count):
        if rng.random() < 0.5:
            base, tail = tail, (tail + spec.txn_size) % spec.footprint
        else:
            base, head = head, (head + spec.txn_size) % spec.footprint
        end = base + spec.txn_size
        if end <= spec.footprint:
            yield [(base, nlines)]
        else:  # ring wrap
            first = (spec.footprint - base) // LINE
            yield [(base, first), (0, nlines - first)]


def _btree_regions(spec: WorkloadSpec, rng: random.Random
                   ) -> Iterable[list[tuple[int, int]]]:
    nlines = spec.txn_size // LINE
    capacity = max(1, BTREE_NODE // spec.txn_size)
    max_nodes = spec.footprint // BTREE_NODE
    # leaves: parallel lists of (separator key, node base, fill count)
    seps = [0.0]
    bases = [0]
    fills = [0]
    next_node = 1
    for _ in range(spec.txn_count):
        key = rng.random()
        idx = bisect_right(seps, key) - 1
        base, fill = bases[idx], fills[idx]
        yield [(base * BTREE_NODE + (fill % capacity) * spec.txn_size, nlines)]
        fills[idx] = fill + 1
        if fills[idx] >= capacity and next_node < max_nodes:
            # split: the upper half of the key range moves to a new node
            seps.insert(idx + 1, seps[idx] + (key - seps[idx]) / 2 + 1e-12)
            bases.insert(idx + 1, next_node)
            fills[idx] = capacity // 2
            fills.insert(idx + 1, 0)
            next_node += 1


def _hashtable_regions(spec: WorkloadSpec, rng: random.Random
                       ) -> Iterable[list[tuple[int, int]]]:
    nlines = spec.txn_size // LINE
    bucket_bytes = HASH_BUCKET_ITEMS * spec.txn_size
    nbuckets = spec.footprint // bucket_bytes
    fill: dict[int, int] = {}
    for _ in range(spec.txn_count):
        b = rng.randrange(nbuckets)
        slot = fill.get(b, 0) % HASH_BUCKET_ITEMS
        fill[b] = slot + 1
        yield [(b * bucket_bytes + slot * spec.txn_size, nlines)]


def _rbtree_regions(spec: WorkloadSpec, rng: random.Random
                    ) -> Iterable[list[tuple[int, int]]]:
    nlines = spec.txn_size // LINE
    slots = spec.footprint // LINE
    for _ in range(spec.txn_count):
        touches = min(2, nlines - 1)  # rebalancing updates in other nodes
        item_lines = nlines - touches
        while True:
            base = rng.randrange(slots - item_lines) * LINE
            extra = [rng.randrange(slots) * LINE for _ in range(touches)]
            regions = sorted([(base, item_lines)] + [(a, 1) for a in extra])
            spans = [(b, b + n * LINE) for b, n in regions]
            if all(spans[i][1] <= spans[i + 1][0] for i in range(len(spans) - 1)):
                break
        yield regions


_GENERATORS = {
    "array": _array_regions,
    "queue": _queue_regions,
    "btree": _btree_regions,
    "hashtable": _hashtable_regions,
    "rbtree": _rbtree_regions,
}


def generate(spec: WorkloadSpec) -> list[TxnDescriptor]:
    if spec.kind not in _GENERATORS:
        raise ValueError(f"unknown workload {spec.kind!r}")
    if spec.txn_size % LINE or spec.txn_size <= 0:
        raise ValueError("txn_size must be a positive multiple of 64")
    rng = random.Random(_seed_int(spec.seed, spec.kind, spec.txn_size, spec.core))
    stream = []
    for i, regions in enumerate(_GENERATORS[spec.kind](spec, rng)):
        stream.append(
            TxnDescriptor(
                txn_id=spec.core * spec.txn_count + i,
                write_set=_lines(rng, regions),
                log_slot=i % spec.log_slots,
                core=spec.core,
            )
        )
    return stream


def export_trace(stream: list[TxnDescriptor], fh: TextIO) -> None:
    """`TXN <id> WRITE <hex-address> <len>` per write region."""
    for txn in stream:
        for base, nlines in txn.regions():
            fh.write(f"TXN {txn.txn_id} WRITE {base:#x} {nlines * LINE}\n")


def import_trace(fh: TextIO, seed: int = 0, log_slots: int = 64
                 ) -> list[TxnDescriptor]:
    rng = random.Random(_seed_int("trace", seed))
    by_txn: dict[int, list[tuple[int, int]]] = {}
    order: list[int] = []
    for lineno, raw in enumerate(fh, 1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 5 or parts[0] != "TXN" or parts[2] != "WRITE":
            raise ValueError(f"trace line {lineno}: malformed record")
        txn_id, addr, size = int(parts[1]), int(parts[3], 16), int(parts[4])
        if txn_id not in by_txn:
            by_txn[txn_id] = []
            order.append(txn_id)
        by_txn[txn_id].append((addr, size // LINE))
    return [
        TxnDescriptor(
            txn_id=tid,
            write_set=_lines(rng, by_txn[tid]),
            log_slot=i % log_slots,
        )
        for i, tid in enumerate(order)
    ]
