"""Durable, detectable *writable* external-context LL/SC.

Writes don't mix with the anchor/forwarding discipline of a single durable
EC object, so the writable object is a pair of them plus one protocol bit
packed next to each payload:

* ``W`` -- the staging object.  A write *installs* ``(v, flipped bit)``
  into ``W`` via the owner's critical handle.
* ``Z`` -- the authoritative object that ``ecll``/``ecvl`` consult.  When
  the bits of ``W`` and ``Z`` disagree there is exactly one staged write in
  flight; any operation that notices this *transfers* it by an ``ecsc`` on
  ``Z`` carrying ``W``'s payload and bit.  Bits equal again means quiesced:
  installs into ``W`` and transfers into ``Z`` strictly alternate (the
  seesaw), and a transferring ``ecsc`` flips ``Z``'s bit while a client
  ``ecsc`` (an *imprint*) preserves it.

Each process holds two EC handles: ``critical`` for the operations whose
visibility its ``detect`` must witness (its own installs and imprints) and
``casual`` for helping, whose detect watermark nobody consults.

63-bit payloads: the protocol bit occupies the low bit of the value word.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import durec
from .specmodels import ACK

PAYLOAD_BITS = 63
PAYLOAD_MAX = (1 << PAYLOAD_BITS) - 1


def pack(val: int, bit: int) -> int:
    if not 0 <= val <= PAYLOAD_MAX:
        raise ValueError(f"payload out of 63-bit range: {val!r}")
    return (val << 1) | bit


def unpack(word: int):
    return word >> 1, word & 1


@dataclass(frozen=True)
class DurEcwHandle:
    hid: int
    critical: durec.DurEcHandle
    casual: durec.DurEcHandle


@dataclass(frozen=True)
class DurEcwObject:
    oid: int
    w: durec.DurEcObject   # staging
    z: durec.DurEcObject   # authoritative


def create_handle(world) -> DurEcwHandle:
    hid = world.next_handle_id()
    h = DurEcwHandle(hid, durec.create_handle(world), durec.create_handle(world))
    world.handles[hid] = h
    return h


def new_object(world, init: int) -> DurEcwObject:
    oid = world.next_object_id()
    o = DurEcwObject(oid, durec.new_object(world, pack(init, 0)), durec.new_object(world, pack(init, 0)))
    world.objects[oid] = o
    return o


def _sub(gen, foot=None):
    # Scheduling boundary: composite algorithms may be explored with each
    # nested durable-EC operation taken as one atomic step.  *foot* is the
    # block's declared (read cells, written cells) over-approximation --
    # either the pair itself or a callable producing it, which the
    # scheduler evaluates in the state where the block is offered; it
    # asserts every action stays inside the declaration and uses it to
    # decide which pending blocks commute.
    if foot is None:
        yield ("mark",)
    elif callable(foot):
        yield ("mark", foot)
    else:
        yield ("mark", foot[0], foot[1])
    return (yield from gen)


def transfer(world, o, h):
    """Carry a staged write from W into Z if the bits disagree."""
    zs, zword = yield from _sub(durec.ecll(world, o.z, h.casual), durec.foot_read(o.z))
    ws, wword = yield from _sub(durec.ecll(world, o.w, h.casual), durec.foot_read(o.w))
    zval, zbit = unpack(zword)
    wval, wbit = unpack(wword)
    if zbit != wbit:
        yield from _sub(durec.ecsc(world, o.z, h.casual, zs, pack(wval, wbit)),
                        durec.foot_install(world, o.z, h.casual))


def ecll(world, o: DurEcwObject, h: DurEcwHandle):
    s, word = yield from _sub(durec.ecll(world, o.z, h.casual), durec.foot_read(o.z))
    return s, unpack(word)[0]


def ecvl(world, o: DurEcwObject, h: DurEcwHandle, s: int):
    return (yield from _sub(durec.ecvl(world, o.z, h.casual, s), durec.foot_read(o.z)))


def ecsc(world, o: DurEcwObject, h: DurEcwHandle, s: int, v: int):
    zs, zword = yield from _sub(durec.ecll(world, o.z, h.casual), durec.foot_read(o.z))
    if zs != s:
        return False
    yield from transfer(world, o, h)
    # Imprint: preserves Z's bit, so a concurrent staged write stays
    # transferable.  A stale bit is harmless -- the context check fails first.
    zbit = unpack(zword)[1]
    r = yield from _sub(durec.ecsc(world, o.z, h.critical, s, pack(v, zbit)),
                        durec.foot_install(world, o.z, h.critical))
    return r


def write(world, o: DurEcwObject, h: DurEcwHandle, v: int):
    ws, wword = yield from _sub(durec.ecll(world, o.w, h.casual), durec.foot_read(o.w))
    zs, zword = yield from _sub(durec.ecll(world, o.z, h.casual), durec.foot_read(o.z))
    wbit = unpack(wword)[1]
    zbit = unpack(zword)[1]
    if wbit == zbit:
        # Quiesced: stage our value under the flipped bit.
        yield from _sub(durec.ecsc(world, o.w, h.critical, ws, pack(v, 1 - wbit)),
                        durec.foot_install(world, o.w, h.critical))
    # Two transfers: the first may finish someone else's staged write, the
    # second then carries ours (or a hitchhiked equal-valued one).
    yield from transfer(world, o, h)
    yield from transfer(world, o, h)
    return ACK


def recover(world, o: DurEcwObject, h: DurEcwHandle):
    yield from _sub(durec.recover(world, o.w, h.casual), durec.foot_install(world, o.w))
    yield from _sub(durec.recover(world, o.z, h.casual), durec.foot_install(world, o.z))
    yield from _sub(durec.recover(world, o.w, h.critical), durec.foot_install(world, o.w))
    yield from _sub(durec.recover(world, o.z, h.critical), durec.foot_install(world, o.z))
    yield from transfer(world, o, h)
    yield from transfer(world, o, h)


def detect(world, o: DurEcwObject, h: DurEcwHandle):
    d = (yield ("read", h.critical.detval_cell))[0]
    return (d, True)


def peek_detect(world, h: DurEcwHandle):
    return (world.mem.peek(h.critical.detval_cell)[0], True)


def start_foot(world, o: DurEcwObject, h: DurEcwHandle, op: str):
    """Footprint of an operation's invocation step under block scheduling.

    The scheduler delivers the invocation together with the operation's
    leading actions up to the first block boundary.  Returns ``(may_end,
    read cells, written cells)`` where *may_end* says whether the operation
    can already complete (deliver its response) within that same step."""
    if op in ("ecll", "ecvl", "ecsc"):
        # One ecll/ecvl of Z; ecsc may fail its context check right after.
        return (True, (o.z.y_cell,), ())
    if op == "write":
        return (False, (o.w.y_cell,), ())   # staging read; never the last block
    if op == "detect":
        return (True, (h.critical.detval_cell,), ())
    raise ValueError(op)


def recover_start_foot(world, o: DurEcwObject, h: DurEcwHandle):
    """Footprint of a recovery entry step: the first nested recovery block
    (a forwarding pass over the staging object); recovery always has
    further blocks, so the step can never complete the recovery."""
    return durec.foot_install(world, o.w)
