"""Durable, detectable LL/SC with implicit per-handle link contexts.

The writable EC object already does all the hard work; this layer restores
the classical LL/SC interface by remembering, per handle and object, the
context returned by the last ``ll``.  The memo lives in persistent cells
(one ``(object id, seq)`` entry per outstanding link) so it survives
crashes; a volatile index over those cells is rebuilt trivially because the
cells themselves are the truth and each handle is single-owner.

``sc`` and ``write`` retire the link eagerly; ``recover`` additionally
drops a link whose context went stale while the crash was in flight, so a
handle never resurrects a context that can no longer succeed.  Entry cells
are recycled through a per-handle free list, keeping the persistent
footprint proportional to the peak number of live links.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import durecw
from .specmodels import ACK


@dataclass(frozen=True)
class DuraLlHandle:
    hid: int
    inner: durecw.DurEcwHandle
    ctx_cells: dict = field(default_factory=dict)   # oid -> cell holding (oid, seq)
    free_cells: list = field(default_factory=list)


@dataclass(frozen=True)
class DuraLlObject:
    oid: int
    inner: durecw.DurEcwObject


def create_handle(world) -> DuraLlHandle:
    hid = world.next_handle_id()
    h = DuraLlHandle(hid, durecw.create_handle(world))
    world.handles[hid] = h
    return h


def new_object(world, init: int) -> DuraLlObject:
    oid = world.next_object_id()
    o = DuraLlObject(oid, durecw.new_object(world, init))
    world.objects[oid] = o
    return o


def _link_cell(world, h: DuraLlHandle, oid: int) -> int:
    cell = h.ctx_cells.get(oid)
    if cell is None:
        cell = h.free_cells.pop() if h.free_cells else world.mem.alloc((0, 0))
        h.ctx_cells[oid] = cell
    return cell


def _drop_link(h: DuraLlHandle, oid: int):
    cell = h.ctx_cells.pop(oid, None)
    if cell is not None:
        h.free_cells.append(cell)
    return cell


def ll(world, o: DuraLlObject, h: DuraLlHandle):
    s, v = yield from durecw.ecll(world, o.inner, h.inner)
    cell = _link_cell(world, h, o.oid)
    # Own scheduling block: the link cell is single-owner, so this block
    # commutes with everything another process can do.
    yield ("mark", (), (cell,))
    yield ("write", cell, (o.oid, s))
    return v


def vl(world, o: DuraLlObject, h: DuraLlHandle):
    cell = h.ctx_cells.get(o.oid)
    if cell is None:
        return False
    s = (yield ("read", cell))[1]
    return (yield from durecw.ecvl(world, o.inner, h.inner, s))


def sc(world, o: DuraLlObject, h: DuraLlHandle, v: int):
    cell = h.ctx_cells.get(o.oid)
    if cell is None:
        return False
    s = (yield ("read", cell))[1]
    r = yield from durecw.ecsc(world, o.inner, h.inner, s, v)
    _drop_link(h, o.oid)
    yield ("mark", (), (cell,))
    yield ("write", cell, (0, 0))
    return r


def write(world, o: DuraLlObject, h: DuraLlHandle, v: int):
    r = yield from durecw.write(world, o.inner, h.inner, v)
    cell = _drop_link(h, o.oid)
    if cell is not None:
        yield ("mark", (), (cell,))
        yield ("write", cell, (0, 0))
    return r


def recover(world, o: DuraLlObject, h: DuraLlHandle):
    yield from durecw.recover(world, o.inner, h.inner)
    cell = h.ctx_cells.get(o.oid)
    if cell is not None:
        yield ("mark", (cell,), ())
        s = (yield ("read", cell))[1]
        if not (yield from durecw.ecvl(world, o.inner, h.inner, s)):
            _drop_link(h, o.oid)
            yield ("mark", (), (cell,))
            yield ("write", cell, (0, 0))


def detect(world, o: DuraLlObject, h: DuraLlHandle):
    return (yield from durecw.detect(world, o.inner, h.inner))


def start_foot(world, o: DuraLlObject, h: DuraLlHandle, op: str):
    """Footprint of an operation's invocation step under block scheduling
    (``(may_end, read cells, written cells)``).  ``vl``/``sc`` without an
    outstanding link return immediately with no shared access; with one,
    the step delivers the leading link-cell read and pauses at the nested
    block's boundary."""
    if op == "ll":
        return (False, (o.inner.z.y_cell,), ())
    if op in ("vl", "sc"):
        cell = h.ctx_cells.get(o.oid)
        if cell is None:
            return (True, (), ())
        return (False, (cell,), ())
    if op == "write":
        return (False, (o.inner.w.y_cell,), ())
    if op == "detect":
        return (True, (h.inner.critical.detval_cell,), ())
    raise ValueError(op)


def recover_start_foot(world, o: DuraLlObject, h: DuraLlHandle):
    return durecw.recover_start_foot(world, o.inner, h.inner)


def peek_detect(world, h: DuraLlHandle):
    return durecw.peek_detect(world, h.inner)
