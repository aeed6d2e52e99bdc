"""Shared runtime state: memory plus durable object/handle registries.

A :class:`World` bundles one memory backend with the registries that map
integer ids (as stored inside cells) back to handle and object records.
The registries model persistent heap metadata: they are populated by the
constructors and survive simulated crashes, while everything reachable
only from an operation's stack frame does not.

Operation bodies are generator functions that *yield* memory actions and
receive results via ``send``; see :mod:`durables.harness.machine` for the
drivers.  Action tuples:

* ``("read", cell)`` -> pair
* ``("write", cell, pair)`` -> None
* ``("cas", cell, expected, new)`` -> bool
* ``("emit", payload)`` -- a monitor event, recorded but free: it costs no
  shared-memory event and never yields control.
* ``("mark",)`` -- a scheduling boundary used when a composite algorithm is
  explored at sub-operation granularity; also free.
"""

from __future__ import annotations


NIL_HANDLE = 0


class World:
    __slots__ = ("mem", "ec_handles", "handles", "objects",
                 "_next_hid", "_next_oid")

    def __init__(self, mem) -> None:
        self.mem = mem
        self.ec_handles = {}   # hid -> DurEcHandle (forward() resolves these)
        self.handles = {}      # hid -> composite handle records
        self.objects = {}      # oid -> object records (all layers)
        self._next_hid = NIL_HANDLE + 1
        self._next_oid = 1

    def next_handle_id(self) -> int:
        hid = self._next_hid
        self._next_hid += 1
        return hid

    def next_object_id(self) -> int:
        oid = self._next_oid
        self._next_oid += 1
        return oid
