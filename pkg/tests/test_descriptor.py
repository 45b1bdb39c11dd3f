import threading

import pytest

from scxkit.descriptor import INVALID, SEQ_SHIFT, DescriptorSpace, DescriptorType
from scxkit.modelcheck import explore_dpor

OP = DescriptorType("op", ("target", "arg"), (("state", 2), ("count", 6)), flag=1)
OTHER = DescriptorType("other", ("x",), (), flag=2)


def test_create_bumps_sequence_by_two():
    sp = DescriptorSpace((OP,))
    h1 = sp.create_new(OP, ("t", 1), {"state": 1})
    h2 = sp.create_new(OP, ("t", 2))
    assert sp.seq_of(h1) == 2 and sp.seq_of(h2) == 4
    assert h1 & 3 == 1
    assert sp.allocations == 1


def test_stale_handle_reads_default():
    sp = DescriptorSpace((OP,))
    h1 = sp.create_new(OP, ("t", 1), {"state": 1, "count": 5})
    assert sp.read_field(OP, h1, "count") == 5
    assert sp.read_field(OP, h1, "arg") == 1
    assert sp.read_immutables(OP, h1) == ("t", 1)
    sp.create_new(OP, ("u", 2))
    assert sp.read_field(OP, h1, "count") is INVALID
    assert sp.read_field(OP, h1, "state", default=3) == 3
    assert sp.read_immutables(OP, h1) is INVALID
    assert sp.cas_field(OP, h1, "state", 0, 2) is INVALID
    sp.write_field(OP, h1, "count", 9)  # ignored
    assert sp.read_field(OP, sp.create_new(OP, ("v", 3)), "count") == 0


def test_cas_and_write_field():
    sp = DescriptorSpace((OP,))
    h = sp.create_new(OP, ("t", 1), {"state": 0, "count": 3})
    assert sp.cas_field(OP, h, "state", 0, 2) == 0
    assert sp.cas_field(OP, h, "state", 0, 1) == 2
    assert sp.read_field(OP, h, "state") == 2
    assert sp.read_field(OP, h, "count") == 3  # neighbour field untouched
    sp.write_field(OP, h, "count", 63)
    assert sp.read_field(OP, h, "count") == 63 and sp.read_field(OP, h, "state") == 2


def test_field_overflow_and_arity_checked():
    sp = DescriptorSpace((OP,))
    with pytest.raises(ValueError):
        sp.create_new(OP, ("t", 1), {"count": 64})
    with pytest.raises(ValueError):
        sp.create_new(OP, ("t",))


def test_distinct_flags_required():
    with pytest.raises(ValueError):
        DescriptorSpace((OP, DescriptorType("dup", (), (), flag=1)))
    with pytest.raises(ValueError):
        DescriptorType("bad", (), (), flag=3)


def test_one_slot_per_thread_per_type():
    sp = DescriptorSpace((OP, OTHER))
    handles = []

    def work():
        for i in range(50):
            handles.append(sp.create_new(OP, (i, i)))
            sp.create_new(OTHER, (i,))

    ts = [threading.Thread(target=work) for _ in range(4)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert sp.allocations == 8
    assert len({(h >> 2) & 0x3FFF for h in handles}) == 4
    assert max(h >> SEQ_SHIFT for h in handles) == 100


def test_reader_never_sees_half_initialized_descriptor():
    """Every interleaving of a reader with a reinitialization: the reader gets
    the old values, the new values through the new handle, or INVALID."""
    seen = set()

    class Ctx:
        pass

    def setup():
        sp = DescriptorSpace((OP,))
        ctx = Ctx()
        ctx.h1 = sp.create_new(OP, ("old", 1), {"state": 1})

        def owner():
            ctx.h2 = sp.create_new(OP, ("new", 2), {"state": 2})

        def reader():
            ctx.imm = sp.read_immutables(OP, ctx.h1)
            ctx.state = sp.read_field(OP, ctx.h1, "state")
        return ctx, [owner, reader]

    def check(ex):
        assert ex.error is None, ex.error
        c = ex.log
        seen.add((c.imm if c.imm is INVALID else tuple(c.imm), c.state))

    n = explore_dpor(setup, check)
    assert n > 1
    allowed = {(("old", 1), 1), (("old", 1), INVALID), (INVALID, INVALID)}
    assert seen <= allowed and (("old", 1), 1) in seen and (INVALID, INVALID) in seen


def test_racing_writers_on_distinct_fields_both_land():
    out = set()

    class Ctx:
        pass

    def setup():
        sp = DescriptorSpace((OP,))
        ctx = Ctx()
        ctx.sp = sp
        ctx.h = sp.create_new(OP, ("t", 0), {"state": 0, "count": 0})
        return ctx, [lambda: sp.cas_field(OP, ctx.h, "state", 0, 3),
                     lambda: sp.write_field(OP, ctx.h, "count", 17)]

    def check(ex):
        assert ex.error is None, ex.error
        c = ex.log
        out.add((c.sp.read_field(OP, c.h, "state"), c.sp.read_field(OP, c.h, "count")))

    explore_dpor(setup, check)
    assert out == {(3, 17)}
