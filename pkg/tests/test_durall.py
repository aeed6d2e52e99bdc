"""Classical LL/SC interface with persistent per-handle link contexts."""

from durables import durall
from durables.specmodels import ACK

from conftest import CRASHED, drive


def setup(world, init=0):
    o = durall.new_object(world, init)
    h = durall.create_handle(world)
    return o, h


def test_ll_sc_roundtrip(world):
    o, h = setup(world, 2)
    assert drive(world, durall.ll(world, o, h)) == 2
    assert drive(world, durall.sc(world, o, h, 5)) is True
    assert drive(world, durall.ll(world, o, h)) == 5


def test_sc_without_ll_fails_free(world):
    o, h = setup(world)
    events = world.mem.stats.events
    assert drive(world, durall.sc(world, o, h, 1)) is False
    assert world.mem.stats.events == events
    assert drive(world, durall.vl(world, o, h)) is False


def test_sc_consumes_link(world):
    o, h = setup(world)
    drive(world, durall.ll(world, o, h))
    assert drive(world, durall.sc(world, o, h, 1)) is True
    assert drive(world, durall.sc(world, o, h, 2)) is False


def test_write_breaks_other_links(world):
    o = durall.new_object(world, 0)
    ha = durall.create_handle(world)
    hb = durall.create_handle(world)
    drive(world, durall.ll(world, o, ha))
    assert drive(world, durall.vl(world, o, ha)) is True
    drive(world, durall.write(world, o, hb, 9))
    assert drive(world, durall.vl(world, o, ha)) is False
    assert drive(world, durall.sc(world, o, ha, 1)) is False


def test_own_write_retires_link(world):
    o, h = setup(world)
    drive(world, durall.ll(world, o, h))
    assert drive(world, durall.write(world, o, h, 3)) == ACK
    assert drive(world, durall.vl(world, o, h)) is False


def test_link_cells_are_recycled(world):
    o, h = setup(world)
    drive(world, durall.ll(world, o, h))
    drive(world, durall.sc(world, o, h, 1))
    allocated = world.mem.stats.cells_allocated
    for v in range(2, 6):
        drive(world, durall.ll(world, o, h))
        drive(world, durall.sc(world, o, h, v))
    assert world.mem.stats.cells_allocated == allocated


def test_crashed_sc_every_point(world):
    for k in range(40):
        o = durall.new_object(world, 0)
        h = durall.create_handle(world)
        drive(world, durall.ll(world, o, h))
        d1, _ = durall.peek_detect(world, h)
        out = drive(world, durall.sc(world, o, h, 7), abandon_after=k)
        if out is not CRASHED:
            assert out is True
            continue
        drive(world, durall.recover(world, o, h))
        d2, _ = durall.peek_detect(world, h)
        if d2 > d1:
            assert drive(world, durall.ll(world, o, h)) == 7
        else:
            # Not installed: the link, if still valid, allows a re-issue.
            r = drive(world, durall.sc(world, o, h, 7))
            assert r is True or drive(world, durall.ll(world, o, h)) == 0


def test_recover_prunes_stale_link(world):
    o = durall.new_object(world, 0)
    ha = durall.create_handle(world)
    hb = durall.create_handle(world)
    drive(world, durall.ll(world, o, ha))
    out = drive(world, durall.sc(world, o, ha, 5), abandon_after=2)
    assert out is CRASHED
    drive(world, durall.write(world, o, hb, 8))   # invalidates ha's context
    drive(world, durall.recover(world, o, ha))
    assert drive(world, durall.vl(world, o, ha)) is False
