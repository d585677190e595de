"""Run configuration with file/flag round-tripping.

Defaults follow the simulated machine: 4-core 2 GHz x86-64, 1 MB 8-way LRU
counter cache (12 CPU cycles), 32-entry write queue, 16 GB PCM in 16 banks
with tRCD/tCL/tCWD/tFAW/tWTR/tWR = 48/15/13/50/7.5/300 ns, and a 40 ns
AES pipeline.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field


LINE = 64
PAGE = 4096
LINES_PER_PAGE = PAGE // LINE

MODES = ("unsec-pm", "secpm-no-cwt", "secpm-no-cwr", "secpm")
WORKLOADS = ("array", "queue", "btree", "hashtable", "rbtree")
TXN_SIZES = (64, 256, 1024, 4096)

GIB = 1 << 30
MIB = 1 << 20
KIB = 1 << 10


@dataclass
class Timing:
    t_rcd_ns: float = 48.0
    t_cl_ns: float = 15.0
    t_cwd_ns: float = 13.0
    t_faw_ns: float = 50.0
    t_wtr_ns: float = 7.5
    t_wr_ns: float = 300.0
    aes_ns: float = 40.0

    @property
    def read_ns(self) -> float:
        # Simplified read composition: row activate + CAS.  tCWD/tFAW/tWTR
        # are carried for fidelity but do not gate the coarse model.
        return self.t_rcd_ns + self.t_cl_ns


@dataclass
class Config:
    mode: str = "secpm"
    workload: str = "btree"
    txn_size: int = 1024
    txn_count: int = 1000
    queue_len: int = 32
    cache_size: int = MIB
    cache_ways: int = 8
    cores: int = 1
    seed: int = 0

    cpu_ghz: float = 2.0
    cache_hit_cycles: int = 12
    # CPU-side cost of issuing a store + clwb, charged once per flush.
    flush_overhead_ns: float = 60.0
    # Compute time between transactions; the write queue drains in the
    # background during this window.
    txn_gap_ns: float = 300.0
    banks: int = 16

    capacity: int = 16 * GIB
    footprint: int = 0          # 0 = workload default (1 GiB / 2 GiB)
    log_slots: int = 64
    use_register: bool = True
    timing: Timing = field(default_factory=Timing)

    @property
    def cache_hit_ns(self) -> float:
        return self.cache_hit_cycles / self.cpu_ghz

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.workload not in WORKLOADS:
            raise ValueError(f"unknown workload {self.workload!r}")
        if self.txn_size % LINE != 0 or self.txn_size <= 0:
            raise ValueError("txn_size must be a positive multiple of 64")
        if self.queue_len < 2:
            raise ValueError("queue_len must be at least 2")
        if self.cache_size < LINE * self.cache_ways:
            raise ValueError("cache_size too small for one set")
        if self.cores < 1 or self.txn_count < 0:
            raise ValueError("cores and txn_count must be positive")


_SCALAR_FIELDS = [f.name for f in dataclasses.fields(Config) if f.name != "timing"]
_TIMING_FIELDS = [f.name for f in dataclasses.fields(Timing)]


def render_config(cfg: Config) -> str:
    """Serialize to the flat ``key = value`` file format."""
    lines = []
    for name in _SCALAR_FIELDS:
        lines.append(f"{name} = {getattr(cfg, name)}")
    for name in _TIMING_FIELDS:
        lines.append(f"{name} = {getattr(cfg.timing, name)}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: Config | None = None) -> Config:
    cfg = dataclasses.replace(base) if base else Config()
    cfg.timing = dataclasses.replace(cfg.timing)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        apply_setting(cfg, key, value)
    return cfg


def apply_setting(cfg: Config, key: str, value: str) -> None:
    if key in _TIMING_FIELDS:
        setattr(cfg.timing, key, float(value))
        return
    if key not in _SCALAR_FIELDS:
        raise ValueError(f"unknown config key {key!r}")
    current = getattr(cfg, key)
    if isinstance(current, bool):
        setattr(cfg, key, value.strip().lower() in ("1", "true", "yes", "on"))
    elif isinstance(current, int):
        setattr(cfg, key, int(value))
    elif isinstance(current, float):
        setattr(cfg, key, float(value))
    else:
        setattr(cfg, key, value)


def default_footprint(workload: str) -> int:
    return GIB if workload in ("array", "queue") else 2 * GIB
