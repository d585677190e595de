"""Crash injection: replay a deterministic scenario, fail it at chosen
durability boundaries, snapshot the durable state, recover, and classify.

Boundaries are announced by the controller after every queue append, drain,
register store, fence, and re-encryption line completion; these are exactly
the durability-relevant state changes, so enumerating them is exhaustive.
Crash point -1 denotes a failure before the scenario's first event.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

from secpmsim.config import Config
from secpmsim.controller import Controller
from secpmsim.txn import Stage, TxnDescriptor, execute, recover, run_transaction


class CrashNow(Exception):
    def __init__(self, label: str):
        super().__init__(label)
        self.label = label


class Verdict(Enum):
    ROLLED_BACK = "rolled-back"
    COMMITTED = "committed"
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"

    @property
    def ok(self) -> bool:
        return self is not Verdict.INCONSISTENT


@dataclass
class CrashPlan:
    strategy: str = "exhaustive"  # exhaustive | random | at
    at: int = 0
    count: int = 0
    seed: int = 0

    def points(self, n_boundaries: int) -> list[int]:
        if self.strategy == "exhaustive":
            return list(range(-1, n_boundaries))
        if self.strategy == "at":
            if not -1 <= self.at < n_boundaries:
                raise ValueError(f"crash point {self.at} out of range")
            return [self.at]
        if self.strategy == "random":
            rng = random.Random(self.seed)
            pool = range(-1, n_boundaries)
            k = min(self.count, len(pool))
            return sorted(rng.sample(pool, k))
        raise ValueError(f"unknown crash strategy {self.strategy!r}")


@dataclass
class Outcome:
    crash_point: int
    label: str
    stage: str
    verdict: Verdict
    failing_address: int | None = None


class Scenario(Protocol):
    cfg: Config

    def fresh(self) -> Controller: ...
    def run(self, ctrl: Controller) -> None: ...
    def stage(self) -> str: ...
    def verify(self, recovered: Controller) -> tuple[Verdict, int | None]: ...


def count_boundaries(factory: Callable[[], Scenario]) -> int:
    scenario = factory()
    ctrl = scenario.fresh()
    count = 0

    def hook(label: str) -> None:
        nonlocal count
        count += 1

    ctrl.boundary_hook = hook
    scenario.run(ctrl)
    return count


def inject(plan: CrashPlan, factory: Callable[[], Scenario]) -> list[Outcome]:
    n = count_boundaries(factory)
    outcomes = []
    for point in plan.points(n):
        scenario = factory()
        ctrl = scenario.fresh()
        seen = 0
        label = "pre"

        def hook(lbl: str) -> None:
            nonlocal seen
            if seen == point:
                raise CrashNow(lbl)
            seen += 1

        if point >= 0:
            ctrl.boundary_hook = hook
            try:
                scenario.run(ctrl)
            except CrashNow as crash:
                label = crash.label
        snap = ctrl.snapshot()
        ctrl.boundary_hook = None
        recovered, _ = recover(snap, scenario.cfg)
        verdict, failing = scenario.verify(recovered)
        outcomes.append(Outcome(point, label, scenario.stage(), verdict, failing))
    return outcomes


# ----------------------------------------------------------------------
# concrete scenarios

def _payload(rng: random.Random) -> bytes:
    return rng.randbytes(64)


@dataclass
class TxnScenario:
    """One durable transaction over pre-initialized lines."""

    cfg: Config
    n_lines: int = 4
    seed: int = 7
    txn: TxnDescriptor = field(init=False)
    pre: list[bytes] = field(init=False)
    post: list[bytes] = field(init=False)

    def __post_init__(self) -> None:
        rng = random.Random(self.seed)
        addrs = [i * 64 for i in range(self.n_lines)]
        self.pre = [_payload(rng) for _ in addrs]
        self.post = [_payload(rng) for _ in addrs]
        self._addrs = addrs

    def fresh(self) -> Controller:
        ctrl = Controller(self.cfg)
        setup = TxnDescriptor(0, list(zip(self._addrs, self.pre)), log_slot=0)
        execute(ctrl, setup)
        ctrl.flush_counter_cache()  # leave write-back baselines consistent
        ctrl.drain_all()
        self.txn = TxnDescriptor(1, list(zip(self._addrs, self.post)), log_slot=1)
        return ctrl

    def run(self, ctrl: Controller) -> None:
        for _ in run_transaction(ctrl, self.txn):
            pass

    def stage(self) -> str:
        return self.txn.stage.value

    def verify(self, recovered: Controller) -> tuple[Verdict, int | None]:
        values = [recovered.handle_read(a) for a in self._addrs]
        if values == self.pre:
            return Verdict.ROLLED_BACK, None
        if values == self.post:
            return Verdict.COMMITTED, None
        # Torn: either a line decrypted to garbage, or the write set is a
        # mix of pre and post images.
        failing = None
        for addr, value, pre, post in zip(self._addrs, values, self.pre, self.post):
            if value != pre and value != post:
                failing = addr
                break
        return Verdict.INCONSISTENT, failing


@dataclass
class AtomicWriteScenario:
    """A logless single-line atomic write; old or new value must survive."""

    cfg: Config
    seed: int = 11
    address: int = 0

    def __post_init__(self) -> None:
        rng = random.Random(self.seed)
        self.old = _payload(rng)
        self.new = _payload(rng)
        self._stage = "atomic-write"

    def fresh(self) -> Controller:
        ctrl = Controller(self.cfg)
        ctrl.handle_flush(self.address, self.old)
        ctrl.drain_all()
        return ctrl

    def run(self, ctrl: Controller) -> None:
        ctrl.handle_flush(self.address, self.new)

    def stage(self) -> str:
        return self._stage

    def verify(self, recovered: Controller) -> tuple[Verdict, int | None]:
        value = recovered.handle_read(self.address)
        if value == self.old:
            return Verdict.ROLLED_BACK, None
        if value == self.new:
            return Verdict.COMMITTED, None
        return Verdict.INCONSISTENT, self.address


@dataclass
class ReencryptScenario:
    """Drive line 0 of page 0 to minor-counter overflow; the triggering
    flush re-encrypts the whole page.  After any crash, every line of the
    page must decrypt to what a crash-free run would hold (line 0 may be
    either the pre- or post-overflow value)."""

    cfg: Config
    seed: int = 13

    def __post_init__(self) -> None:
        rng = random.Random(self.seed)
        self.values = [_payload(rng) for _ in range(128)]
        self._stage = "reencrypt"
        self._expected: list[bytes] | None = None

    def fresh(self) -> Controller:
        ctrl = Controller(self.cfg)
        for value in self.values[:127]:
            ctrl.handle_flush(0, value)
        ctrl.drain_all()
        if self._expected is None:
            probe = Controller(self.cfg)
            for value in self.values[:127]:
                probe.handle_flush(0, value)
            probe.handle_flush(0, self.values[127])
            probe.drain_all()
            self._expected = [probe.handle_read(i * 64) for i in range(64)]
        return ctrl

    def run(self, ctrl: Controller) -> None:
        ctrl.handle_flush(0, self.values[127])  # overflow -> re-encryption

    def stage(self) -> str:
        return self._stage

    def verify(self, recovered: Controller) -> tuple[Verdict, int | None]:
        assert self._expected is not None
        line0 = recovered.handle_read(0)
        if line0 not in (self.values[126], self.values[127]):
            return Verdict.INCONSISTENT, 0
        for i in range(1, 64):
            if recovered.handle_read(i * 64) != self._expected[i]:
                return Verdict.INCONSISTENT, i * 64
        return Verdict.CONSISTENT, None
