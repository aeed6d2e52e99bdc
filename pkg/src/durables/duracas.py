"""Durable, detectable compare-and-swap with reads and writes.

The object is the same staging/authoritative pair as the writable EC
object (W and Z with a protocol bit); the client-facing operations differ:

* ``read`` -- one load of ``Z``.
* ``cas(old, new)`` -- up to two rounds of: load ``Z``; give up if the
  value isn't ``old``; help any staged write across; then try to *imprint*
  ``new`` over ``Z`` under the loaded context.  A CAS that loses its
  imprint to a write of the very value it expected gets a second, decisive
  round -- the only way the second imprint can fail is another write or
  CAS that overwrote ``old``, which justifies answering false.  A CAS whose
  expected and new values coincide answers true without touching anything.
* ``write(v)`` -- stages ``v`` under a flipped bit and transfers it, like
  the writable EC object's write.  Writing the value already present is a
  no-op acknowledgement: it must not consume a context, or it would starve
  concurrent CASes that already loaded one.

Detectability: each handle persists the *kind* of its in-flight operation
before touching shared memory, and ``detect`` pairs the critical handle's
watermark with that kind to report the completed operation's response
(true for CAS, an acknowledgement for write).
"""

from __future__ import annotations

from dataclasses import dataclass

from . import durec
from .durecw import pack, unpack, transfer as transfer_write, _sub
from .specmodels import ACK

OP_NONE = 0
OP_CAS = 1
OP_WRITE = 2


@dataclass(frozen=True)
class DuraCasHandle:
    hid: int
    critical: durec.DurEcHandle
    casual: durec.DurEcHandle
    op_cell: int          # persisted kind of the in-flight operation


@dataclass(frozen=True)
class DuraCasObject:
    oid: int
    w: durec.DurEcObject  # staging
    z: durec.DurEcObject  # authoritative


def create_handle(world) -> DuraCasHandle:
    hid = world.next_handle_id()
    h = DuraCasHandle(
        hid,
        durec.create_handle(world),
        durec.create_handle(world),
        world.mem.alloc((OP_NONE, 0)),
    )
    world.handles[hid] = h
    return h


def new_object(world, init: int) -> DuraCasObject:
    oid = world.next_object_id()
    o = DuraCasObject(oid, durec.new_object(world, pack(init, 0)), durec.new_object(world, pack(init, 0)))
    world.objects[oid] = o
    return o


def read(world, o: DuraCasObject, h: DuraCasHandle):
    _, word = yield from _sub(durec.ecll(world, o.z, h.casual), durec.foot_read(o.z))
    return unpack(word)[0]


def cas(world, o: DuraCasObject, h: DuraCasHandle, old: int, new: int):
    yield ("write", h.op_cell, (OP_CAS, 0))
    for rnd in (1, 2):
        zs, zword = yield from _sub(durec.ecll(world, o.z, h.critical), durec.foot_read(o.z))
        zval, zbit = unpack(zword)
        if zval != old:
            return False
        if old == new:
            # Nothing to change; succeeding without an imprint keeps the
            # context chain untouched for everyone else.
            yield ("emit", ("trivial_cas", o.oid, old))
            return True
        yield from transfer_write(world, o, h)
        if (yield from _sub(durec.ecsc(world, o.z, h.critical, zs, pack(new, zbit)),
                            durec.foot_install(world, o.z, h.critical))):
            return True
        # Round 1 can lose the context to a write re-installing ``old``
        # (value unchanged); round 2 cannot lose it to anything that
        # preserves the value.
        if rnd == 2:
            yield ("emit", ("cas_second_fail", o.oid))
            return False
    return False


def write(world, o: DuraCasObject, h: DuraCasHandle, v: int):
    yield ("write", h.op_cell, (OP_WRITE, 0))
    ws, wword = yield from _sub(durec.ecll(world, o.w, h.critical), durec.foot_read(o.w))
    zs, zword = yield from _sub(durec.ecll(world, o.z, h.casual), durec.foot_read(o.z))
    zval, zbit = unpack(zword)
    wbit = unpack(wword)[1]
    if zval == v:
        yield ("emit", ("trivial_write", o.oid, v))
        return ACK
    if wbit == zbit:
        yield from _sub(durec.ecsc(world, o.w, h.critical, ws, pack(v, 1 - wbit)),
                        durec.foot_install(world, o.w, h.critical))
    yield from transfer_write(world, o, h)
    yield from transfer_write(world, o, h)
    return ACK


def recover(world, o: DuraCasObject, h: DuraCasHandle):
    yield from _sub(durec.recover(world, o.w, h.casual), durec.foot_install(world, o.w))
    yield from _sub(durec.recover(world, o.z, h.casual), durec.foot_install(world, o.z))
    yield from _sub(durec.recover(world, o.z, h.critical), durec.foot_install(world, o.z))
    yield from _sub(durec.recover(world, o.w, h.critical), durec.foot_install(world, o.w))
    yield from transfer_write(world, o, h)
    yield from transfer_write(world, o, h)


def detect(world, o: DuraCasObject, h: DuraCasHandle):
    d = (yield ("read", h.critical.detval_cell))[0]
    kind = (yield ("read", h.op_cell))[0]
    return (d, True if kind == OP_CAS else ACK)


def peek_detect(world, h: DuraCasHandle):
    d = world.mem.peek(h.critical.detval_cell)[0]
    kind = world.mem.peek(h.op_cell)[0]
    return (d, True if kind == OP_CAS else ACK)


def start_foot(world, o: DuraCasObject, h: DuraCasHandle, op: str):
    """Footprint of an operation's invocation step under block scheduling
    (``(may_end, read cells, written cells)``; see the writable object's
    twin).  ``cas``/``write`` persist the operation kind and then pause at
    their first block boundary; ``read`` runs its single block to the
    response."""
    if op == "read":
        return (True, (o.z.y_cell,), ())
    if op in ("cas", "write"):
        return (False, (), (h.op_cell,))
    if op == "detect":
        return (True, (h.critical.detval_cell, h.op_cell), ())
    raise ValueError(op)


def recover_start_foot(world, o: DuraCasObject, h: DuraCasHandle):
    return durec.foot_install(world, o.w)
