"""Durable, detectable external-context LL/SC from two cells per object.

An object is a pair of cells:

* ``X`` -- the anchor: ``(handle id, seq)``.  A successful ``ecsc`` CASes
  its own handle and a fresh context into ``X`` (an *install*); the value
  itself is parked in the installer's handle.
* ``Y`` -- the public face: ``(seq, value)``.  ``ecll``/``ecvl`` touch only
  ``Y``.  Anyone who observes an installed-but-unpublished ``X`` copies the
  installer's value into ``Y`` (a *move*), so installs and moves strictly
  alternate per object and ``X.seq >= Y.seq`` always holds.

A handle is also two cells: ``val`` (where installs park the new value)
and ``detval`` (a monotone watermark of the owner's installed contexts,
raised by helpers before they move).  ``detect`` is a single read of
``detval``: it increased across an operation iff that operation's install
took effect, which is exactly the information a client needs after a crash
to decide whether re-issuing is safe.

Crash recovery is helping: ``recover`` just runs the same forwarding pass
that every ``ecsc`` runs after its CAS, which finishes any half-published
install (its own or anyone's) and settles ``detval``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .world import NIL_HANDLE


@dataclass(frozen=True)
class DurEcHandle:
    hid: int
    val_cell: int      # value parked by this handle's installs
    detval_cell: int   # monotone detect watermark


@dataclass(frozen=True)
class DurEcObject:
    oid: int
    x_cell: int        # anchor: (handle id, seq)
    y_cell: int        # public: (seq, value)


def create_handle(world) -> DurEcHandle:
    hid = world.next_handle_id()
    h = DurEcHandle(hid, world.mem.alloc((0, 0)), world.mem.alloc((0, 0)))
    world.ec_handles[hid] = h
    return h


def new_object(world, init: int) -> DurEcObject:
    oid = world.next_object_id()
    o = DurEcObject(oid, world.mem.alloc((NIL_HANDLE, 0)), world.mem.alloc((0, init)))
    world.objects[oid] = o
    return o


def ecll(world, o: DurEcObject, h: DurEcHandle):
    return (yield ("read", o.y_cell))  # (seq, value)


def ecvl(world, o: DurEcObject, h: DurEcHandle, s: int):
    y = yield ("read", o.y_cell)
    return y[0] == s


def ecsc(world, o: DurEcObject, h: DurEcHandle, s: int, v: int):
    y = yield ("read", o.y_cell)
    if y[0] != s:
        return False
    yield ("write", h.val_cell, (v, 0))
    hh, xseq = yield ("read", o.x_cell)
    d = (yield ("read", h.detval_cell))[0]
    # Fresh context: above everything this object or this handle has seen,
    # so a helper raising detval to it is unambiguous evidence of *this* install.
    s2 = max(xseq, d) + 1
    # Expect (hh, s), not (hh, xseq): if another install slid in after the
    # Y read, X.seq moved past s and this CAS must fail.
    r = yield ("cas", o.x_cell, (hh, s), (h.hid, s2))
    yield from forward(world, o, h)
    return r


def forward(world, o: DurEcObject, h: DurEcHandle):
    """Publish the latest install, if any part of it is still pending.

    The trailing ``"fin"`` marker flags actions that may be an operation's
    last shared-memory event (the scheduler bundles the response with them);
    it is metadata for the exploration engine and invisible to memory.
    """
    xh, xseq = yield ("read", o.x_cell, "fin")
    if xh == NIL_HANDLE:
        return
    inst = world.ec_handles[xh]
    d = (yield ("read", inst.detval_cell))[0]
    if d < xseq:
        # Raise the installer's watermark before publishing, so detect can
        # never miss an install whose value became visible.
        yield ("cas", inst.detval_cell, (d, 0), (xseq, 0))
    vh = (yield ("read", inst.val_cell))[0]
    y = yield ("read", o.y_cell, "fin")
    if y[0] < xseq:
        yield ("cas", o.y_cell, y, (xseq, vh), "fin")


def recover(world, o: DurEcObject, h: DurEcHandle):
    yield from forward(world, o, h)


def detect(world, o: DurEcObject, h: DurEcHandle):
    d = (yield ("read", h.detval_cell))[0]
    return (d, True)


def foot_read(o: DurEcObject):
    """Declared cell footprint of an ``ecll``/``ecvl`` pass: one load of
    the public face.  Used by composite objects to annotate scheduling
    blocks for partial-order reduction."""
    return ((o.y_cell,), ())


def foot_install(world, o: DurEcObject, h: DurEcHandle = None):
    """Declared footprint for an ``ecsc``/``recover`` scheduling block.

    Forwarding touches whichever handle is installed in the anchor when the
    block's own forwarding pass reads it; with the block taken as one
    atomic step that is either the anchor holder at the moment the block is
    scheduled or (after a successful ``ecsc`` CAS) the block's own handle
    ``h``.  The footprint is therefore a *callable* the scheduler evaluates
    in the exact state where the block is offered as a choice: anchor,
    face, ``h``'s cells, and the current anchor holder's cells.  This stays
    honest while the block waits its turn because changing which handle the
    block will forward requires writing the anchor, and the anchor is
    always declared -- any such step is dependent, never commuted."""
    def foot():
        cells = [o.x_cell, o.y_cell]
        if h is not None:
            cells += [h.val_cell, h.detval_cell]
        xh = world.mem.peek(o.x_cell)[0]
        if xh != NIL_HANDLE:
            inst = world.ec_handles[xh]
            if inst.val_cell not in cells:
                cells += [inst.val_cell, inst.detval_cell]
        t = tuple(cells)
        return (t, t)
    return foot


def peek_detect(world, h: DurEcHandle):
    """detect() as a free harness probe (no shared-memory event)."""
    return (world.mem.peek(h.detval_cell)[0], True)
