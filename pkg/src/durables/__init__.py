"""Durable, detectable shared objects for crash-restart persistent memory.

The package has two halves:

* the objects themselves -- :mod:`durables.durec` (a detectable
  load-link / validate / store-conditional register), :mod:`durables.durecw`
  (the same plus a detectable write), :mod:`durables.durall` (LL/SC with
  per-process link contexts) and :mod:`durables.duracas` (detectable
  read / write / compare-and-swap) -- written as generators that yield
  persistent-memory actions so one implementation serves both the
  deterministic model checker and real threads;
* the verification harness under :mod:`durables.harness`, plus the
  durable-linearizability checker, detectability audit and structural
  monitors in :mod:`durables.verify`.
"""

from . import duracas, durall, durec, durecw, verify
from .pmem import MASK64, NativeMemory, SimMemory
from .specmodels import ACK, SpecError
from .world import NIL_HANDLE, World

__all__ = [
    "ACK",
    "MASK64",
    "NIL_HANDLE",
    "NativeMemory",
    "SimMemory",
    "SpecError",
    "World",
    "duracas",
    "durall",
    "durec",
    "durecw",
    "verify",
]
