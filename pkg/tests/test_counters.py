import random

import pytest

from secpmsim.counters import (
    MINOR_MAX,
    AddressError,
    CounterAddressMap,
    CounterCache,
    CounterLine,
    OverflowSignal,
    increment_minor,
)

BASE = 1 << 40


def test_counter_line_serializes_to_64_bytes():
    line = CounterLine(major=5, minors=[i % 128 for i in range(64)])
    raw = line.serialize()
    assert len(raw) == 64
    assert CounterLine.deserialize(raw) == line


def test_serialize_round_trip_extremes():
    line = CounterLine(major=(1 << 64) - 1, minors=[MINOR_MAX] * 64)
    assert CounterLine.deserialize(line.serialize()) == line
    zero = CounterLine()
    assert zero.serialize() == b"\0" * 64


def test_serialize_rejects_bad_minor():
    with pytest.raises(ValueError):
        CounterLine(minors=[128] + [0] * 63).serialize()
    with pytest.raises(ValueError):
        CounterLine(minors=[-1] + [0] * 63).serialize()


def test_deserialize_rejects_wrong_length():
    with pytest.raises(ValueError):
        CounterLine.deserialize(b"\0" * 63)


def test_counter_value_is_concatenation():
    line = CounterLine(major=3, minors=[0] * 64)
    line.minors[10] = 5
    assert line.counter_value(10) == (3 << 7) | 5


def test_increment_minor_copies():
    line = CounterLine()
    bumped = increment_minor(line, 7)
    assert line.minors[7] == 0 and bumped.minors[7] == 1
    assert bumped.major == line.major


def test_increment_overflow_signals_page():
    line = CounterLine(minors=[MINOR_MAX] * 64)
    with pytest.raises(OverflowSignal) as excinfo:
        increment_minor(line, 3)
    assert excinfo.value.minor_index == 3


def test_increment_rejects_bad_index():
    with pytest.raises(ValueError):
        increment_minor(CounterLine(), 64)


def test_locate_counter_math():
    cmap = CounterAddressMap(counter_region_base=BASE, data_region_span=4)
    assert cmap.locate(0) == (BASE, 0)
    assert cmap.locate(64) == (BASE, 1)
    assert cmap.locate(4096) == (BASE + 64, 0)
    assert cmap.locate(4096 + 63 * 64) == (BASE + 64, 63)


def test_locate_rejects_misaligned_and_outside():
    cmap = CounterAddressMap(counter_region_base=BASE, data_region_span=2)
    with pytest.raises(AddressError):
        cmap.locate(33)
    with pytest.raises(AddressError):
        cmap.locate(2 * 4096)  # one page past the region


def test_counter_region_is_disjoint():
    cmap = CounterAddressMap(counter_region_base=BASE, data_region_span=100)
    assert cmap.is_counter_address(BASE)
    assert not cmap.is_counter_address(99 * 4096)


def test_cache_hit_miss_counting():
    cache = CounterCache(capacity_bytes=64 * 16, ways=4)
    assert cache.lookup(BASE) is None
    cache.insert(BASE, CounterLine(major=1))
    hit = cache.lookup(BASE)
    assert hit is not None and hit.major == 1
    assert (cache.hits, cache.misses) == (1, 1)
    assert cache.hit_rate == 0.5


def test_cache_lru_eviction_order():
    cache = CounterCache(capacity_bytes=64 * 2, ways=2)  # one set, two ways
    cache.insert(0, CounterLine(major=0))
    cache.insert(64, CounterLine(major=1))
    cache.lookup(0)  # 0 becomes most recent
    cache.insert(128, CounterLine(major=2))  # evicts 64
    assert cache.lookup(64) is None
    assert cache.lookup(0) is not None
    assert cache.lookup(128) is not None


def test_cache_clean_eviction_drops_silently():
    cache = CounterCache(capacity_bytes=64 * 2, ways=2)
    cache.insert(0, CounterLine())
    cache.insert(64, CounterLine())
    assert cache.insert(128, CounterLine()) is None  # clean victim dropped


def test_cache_dirty_eviction_surfaces_victim():
    cache = CounterCache(capacity_bytes=64 * 2, ways=2)
    cache.insert(0, CounterLine(major=9), dirty=True)
    cache.insert(64, CounterLine())
    victim = cache.insert(128, CounterLine())
    assert victim is not None
    vaddr, vline = victim
    assert vaddr == 0 and vline.major == 9


def test_cache_reinsert_updates_in_place():
    cache = CounterCache(capacity_bytes=64 * 8, ways=8)
    cache.insert(0, CounterLine(major=1))
    cache.insert(0, CounterLine(major=2))
    assert cache.lookup(0).major == 2


def test_cache_capacity_never_exceeded():
    cache = CounterCache(capacity_bytes=64 * 32, ways=4)
    rng = random.Random(1)
    for _ in range(500):
        cache.insert(rng.randrange(256) * 64, CounterLine())
    assert all(len(s) <= cache.ways for s in cache._sets)


def test_cache_mark_clean():
    cache = CounterCache(capacity_bytes=64 * 2, ways=2)
    cache.insert(0, CounterLine(), dirty=True)
    cache.mark_clean(0)
    assert cache.dirty_entries() == []


def test_cache_rejects_tiny_capacity():
    with pytest.raises(ValueError):
        CounterCache(capacity_bytes=64, ways=8)
