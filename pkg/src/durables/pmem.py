"""Persistent word-pair memory.

The unit of storage is a *cell*: a pair of 64-bit words that can be read,
written, and compare-and-swapped atomically (double-width CAS).  Cell
contents are durable by construction -- a crash discards in-flight
operation frames, never backend state -- so the recovery story of the
algorithms built on top reduces to reasoning about which cell updates had
landed before the crash.

Two backends share the interface:

* :class:`SimMemory` -- a deterministic in-process store.  It is only ever
  driven from the single scheduler thread of the verification harness,
  which delivers at most one access per scheduler step, so every run is
  replayable from the scheduler's choice string alone.
* :class:`NativeMemory` -- a thread-safe store for stress runs.  Reads and
  writes of a cell slot are atomic under the interpreter; CAS takes a
  per-cell lock to make the compare-and-set indivisible.

Cells are identified by small integers handed out by ``alloc``.  Cross-cell
references (e.g. a handle stored inside an object's anchor cell) are stored
as these integer ids, never as Python object references, mirroring how a
real persistent heap would store them.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

MASK64 = (1 << 64) - 1

#: A cell's content: a pair of 64-bit words.  Single-word fields keep the
#: second word at zero.
Pair = tuple  # (int, int)


def check_pair(value) -> None:
    """Validate that *value* is a legal cell content."""
    if (
        not isinstance(value, tuple)
        or len(value) != 2
        or not all(isinstance(w, int) and 0 <= w <= MASK64 for w in value)
    ):
        raise ValueError(f"cell content must be a pair of 64-bit words, got {value!r}")


@dataclass
class MemStats:
    """Allocation and traffic counters for one memory instance.

    ``cells_allocated`` is exact and monotone; the verification suite uses
    it to pin down the space consumption of each construction.  ``events``
    counts shared-memory accesses (read/write/cas); per-operation breakdowns
    are derived from the harness trace, not tracked here.
    """

    cells_allocated: int = 0
    events: int = 0
    reads: int = 0
    writes: int = 0
    cas_attempts: int = 0
    cas_failures: int = 0


class SimMemory:
    """Deterministic single-threaded cell store (reference semantics)."""

    __slots__ = ("cells", "stats")

    def __init__(self) -> None:
        self.cells: list[Pair] = []
        self.stats = MemStats()

    def alloc(self, init: Pair) -> int:
        check_pair(init)
        self.cells.append(init)
        self.stats.cells_allocated += 1
        return len(self.cells) - 1

    def read(self, cell: int) -> Pair:
        st = self.stats
        st.events += 1
        st.reads += 1
        return self.cells[cell]

    def write(self, cell: int, value: Pair) -> None:
        st = self.stats
        st.events += 1
        st.writes += 1
        self.cells[cell] = value

    def cas(self, cell: int, expected: Pair, new: Pair) -> bool:
        st = self.stats
        st.events += 1
        st.cas_attempts += 1
        if self.cells[cell] == expected:
            self.cells[cell] = new
            return True
        st.cas_failures += 1
        return False

    def peek(self, cell: int) -> Pair:
        """Read without counting an event (harness probes only)."""
        return self.cells[cell]


class NativeMemory:
    """Thread-safe cell store for stress runs.

    Slot loads and stores are already indivisible under the interpreter's
    execution model; only CAS needs a lock to pair the compare with the
    store.  One lock per cell keeps independent cells uncontended.
    """

    __slots__ = ("_cells", "_locks", "_alloc_lock", "stats")

    def __init__(self) -> None:
        self._cells: list[Pair] = []
        self._locks: list[threading.Lock] = []
        self._alloc_lock = threading.Lock()
        self.stats = MemStats()

    def alloc(self, init: Pair) -> int:
        check_pair(init)
        with self._alloc_lock:
            self._cells.append(init)
            self._locks.append(threading.Lock())
            self.stats.cells_allocated += 1
            return len(self._cells) - 1

    def read(self, cell: int) -> Pair:
        return self._cells[cell]

    def write(self, cell: int, value: Pair) -> None:
        self._cells[cell] = value

    def cas(self, cell: int, expected: Pair, new: Pair) -> bool:
        with self._locks[cell]:
            if self._cells[cell] == expected:
                self._cells[cell] = new
                return True
            return False

    def peek(self, cell: int) -> Pair:
        return self._cells[cell]
