"""Cell store semantics: allocation, atomic pair CAS, and stat counting."""

import threading

import pytest
from hypothesis import given
from hypothesis import strategies as st

from durables.pmem import MASK64, NativeMemory, SimMemory, check_pair

words = st.integers(min_value=0, max_value=MASK64)
pairs = st.tuples(words, words)


def test_alloc_read_roundtrip():
    mem = SimMemory()
    c = mem.alloc((7, 3))
    assert mem.read(c) == (7, 3)
    assert mem.stats.cells_allocated == 1


def test_write_then_read():
    mem = SimMemory()
    c = mem.alloc((0, 0))
    mem.write(c, (1, 2))
    assert mem.read(c) == (1, 2)


def test_cas_success_and_failure():
    mem = SimMemory()
    c = mem.alloc((1, 0))
    assert mem.cas(c, (1, 0), (2, 0)) is True
    assert mem.read(c) == (2, 0)
    assert mem.cas(c, (1, 0), (3, 0)) is False
    assert mem.read(c) == (2, 0)
    assert mem.stats.cas_attempts == 2
    assert mem.stats.cas_failures == 1


def test_peek_does_not_count():
    mem = SimMemory()
    c = mem.alloc((5, 5))
    before = mem.stats.events
    assert mem.peek(c) == (5, 5)
    assert mem.stats.events == before


def test_event_counters():
    mem = SimMemory()
    c = mem.alloc((0, 0))
    mem.read(c)
    mem.write(c, (1, 0))
    mem.cas(c, (1, 0), (2, 0))
    st_ = mem.stats
    assert (st_.events, st_.reads, st_.writes, st_.cas_attempts) == (3, 1, 1, 1)


@pytest.mark.parametrize("bad", [None, 1, (1,), (1, 2, 3), ("a", 2), (-1, 0), (MASK64 + 1, 0)])
def test_check_pair_rejects(bad):
    with pytest.raises(ValueError):
        check_pair(bad)


@given(pairs)
def test_check_pair_accepts_word_pairs(p):
    check_pair(p)


@given(st.lists(pairs, min_size=1, max_size=8), pairs)
def test_sim_write_last_wins(initials, final):
    mem = SimMemory()
    cells = [mem.alloc(p) for p in initials]
    for c, p in zip(cells, initials):
        assert mem.read(c) == p
    mem.write(cells[0], final)
    assert mem.read(cells[0]) == final


def test_native_cas_is_atomic_under_contention():
    mem = NativeMemory()
    c = mem.alloc((0, 0))
    wins = []

    def body():
        n = 0
        while True:
            v = mem.read(c)
            if v[0] >= 2000:
                break
            if mem.cas(c, v, (v[0] + 1, 0)):
                n += 1
        wins.append(n)

    threads = [threading.Thread(target=body) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    # Every successful CAS incremented exactly once: no lost updates.
    assert sum(wins) == 2000
    assert mem.read(c) == (2000, 0)
