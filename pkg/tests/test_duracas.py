"""Detectable read/write/CAS register built on two writable EC objects."""

from durables import duracas
from durables.specmodels import ACK

from conftest import CRASHED, drive


def setup(world, init=0):
    o = duracas.new_object(world, init)
    h = duracas.create_handle(world)
    return o, h


def test_read_write_cas(world):
    o, h = setup(world, 1)
    assert drive(world, duracas.read(world, o, h)) == 1
    assert drive(world, duracas.write(world, o, h, 5)) == ACK
    assert drive(world, duracas.cas(world, o, h, 5, 9)) is True
    assert drive(world, duracas.cas(world, o, h, 5, 2)) is False
    assert drive(world, duracas.read(world, o, h)) == 9


def test_trivial_cas_installs_nothing(world):
    o, h = setup(world, 4)
    d0, _ = duracas.peek_detect(world, h)
    snapshot = [world.mem.peek(c) for c in (o.z.x_cell, o.z.y_cell, o.w.x_cell, o.w.y_cell)]
    assert drive(world, duracas.cas(world, o, h, 4, 4)) is True
    # A same-value CAS acknowledges without touching either EC object or
    # the watermark.
    assert duracas.peek_detect(world, h)[0] == d0
    assert [world.mem.peek(c) for c in (o.z.x_cell, o.z.y_cell, o.w.x_cell, o.w.y_cell)] == snapshot
    assert drive(world, duracas.read(world, o, h)) == 4


def test_trivial_write_leaves_seq_alone(world):
    o, h = setup(world, 6)
    z_before = world.mem.peek(o.z.y_cell)
    assert drive(world, duracas.write(world, o, h, 6)) == ACK
    assert world.mem.peek(o.z.y_cell) == z_before


def test_detect_response_kind_tracks_op(world):
    o, h = setup(world, 0)
    drive(world, duracas.write(world, o, h, 3))
    d, r = duracas.peek_detect(world, h)
    assert r == ACK
    drive(world, duracas.cas(world, o, h, 3, 4))
    d2, r2 = duracas.peek_detect(world, h)
    assert d2 > d and r2 is True


def test_crashed_cas_every_point(world):
    for k in range(45):
        o = duracas.new_object(world, 0)
        h = duracas.create_handle(world)
        d1, _ = duracas.peek_detect(world, h)
        out = drive(world, duracas.cas(world, o, h, 0, 7), abandon_after=k)
        if out is not CRASHED:
            assert out is True
            continue
        drive(world, duracas.recover(world, o, h))
        d2, r2 = duracas.peek_detect(world, h)
        if d2 > d1:
            assert r2 is True
            assert drive(world, duracas.read(world, o, h)) == 7
        else:
            assert drive(world, duracas.cas(world, o, h, 0, 7)) is True
            assert drive(world, duracas.read(world, o, h)) == 7


def test_crashed_write_every_point(world):
    for k in range(45):
        o = duracas.new_object(world, 0)
        h = duracas.create_handle(world)
        d1, _ = duracas.peek_detect(world, h)
        out = drive(world, duracas.write(world, o, h, 9), abandon_after=k)
        if out is not CRASHED:
            assert out == ACK
            continue
        drive(world, duracas.recover(world, o, h))
        d2, r2 = duracas.peek_detect(world, h)
        if d2 > d1:
            assert r2 == ACK
        else:
            assert drive(world, duracas.write(world, o, h, 9)) == ACK
        assert drive(world, duracas.read(world, o, h)) == 9


def test_space_is_4m_plus_5n(world):
    base = world.mem.stats.cells_allocated
    duracas.new_object(world, 0)
    assert world.mem.stats.cells_allocated == base + 4
    duracas.create_handle(world)
    assert world.mem.stats.cells_allocated == base + 4 + 5
