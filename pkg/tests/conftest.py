"""Shared test helpers: drive algorithm generators straight against memory."""

from __future__ import annotations

import pytest

from durables.pmem import SimMemory
from durables.world import World

CRASHED = object()


def drive(world, gen, abandon_after=None):
    """Run an action generator to completion against ``world.mem``.

    ``abandon_after=k`` drops the frame after executing k memory actions,
    simulating a crash, and returns :data:`CRASHED`.
    """
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
                    return CRASHED
                budget -= 1
            if tag == "read":
                res = world.mem.read(item[1])
            elif tag == "write":
                world.mem.write(item[1], item[2])
                res = None
            elif tag == "cas":
                res = world.mem.cas(item[1], item[2], item[3])
            else:
                raise AssertionError(f"unknown action {item!r}")
            item = gen.send(res)
    except StopIteration as stop:
        return stop.value


@pytest.fixture
def world():
    return World(SimMemory())
