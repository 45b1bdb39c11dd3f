import random
import threading

import greenlet
import pytest

from helpers import hammer
from scxkit.kcas import (FAILED, KCAS_T, SUCCEEDED, UNDECIDED, KcasDomain, KcasEntry, WordArray,
                         decode, encode)
from scxkit.modelcheck import explore_dpor


def test_encode_roundtrip():
    assert decode(encode(12345)) == 12345
    assert encode(7) & 3 == 0


def test_two_cas_success_and_failure():
    d = KcasDomain()
    a = WordArray(4)
    assert d.kcas([KcasEntry(a, 0, 0, encode(1)), KcasEntry(a, 1, 0, encode(2))])
    assert [d.read(a, i) for i in range(2)] == [encode(1), encode(2)]
    assert not d.kcas([KcasEntry(a, 0, encode(1), 0), KcasEntry(a, 1, 0, 0)])
    assert [d.read(a, i) for i in range(2)] == [encode(1), encode(2)]


def test_bad_arguments():
    d = KcasDomain()
    a = WordArray(4)
    with pytest.raises(ValueError):
        d.kcas([KcasEntry(a, 0, 0, 4), KcasEntry(a, 0, 0, 8)])
    with pytest.raises(ValueError):
        d.kcas([KcasEntry(a, 0, 0, 1)])
    with pytest.raises(ValueError):
        d.kcas([])
    with pytest.raises(ValueError):
        WordArray(2, fill=2)


def test_dcss_semantics():
    d = KcasDomain()
    a = WordArray(2)
    k = d.space.create_new(KCAS_T, ((),), {"state": UNDECIDED})
    assert d.dcss(k, UNDECIDED, a, 0, 0, 8) == 0
    assert a.cells[0] == 8
    assert d.dcss(k, UNDECIDED, a, 0, 0, 12) == 8  # second compare fails
    assert a.cells[0] == 8
    d.space.cas_field(KCAS_T, k, "state", UNDECIDED, FAILED)
    assert d.dcss(k, UNDECIDED, a, 0, 8, 12) == 8  # first compare fails
    assert a.cells[0] == 8
    assert d.dcss_read(a, 0) == 8


def test_stale_kcas_handle_counts_as_finished():
    d = KcasDomain()
    a = WordArray(1)
    k = d.space.create_new(KCAS_T, ((),), {"state": UNDECIDED})
    d.space.create_new(KCAS_T, ((),), {"state": UNDECIDED})
    assert d.space.read_field(KCAS_T, k, "state", SUCCEEDED) == SUCCEEDED
    d.dcss(k, UNDECIDED, a, 0, 0, 8)
    assert a.cells[0] == 0


def test_small_sum_law():
    d = KcasDomain()
    arr = WordArray(64)
    wins = [0] * 4

    def work(t):
        rng = random.Random(t)
        for _ in range(300):
            es = []
            for i in rng.sample(range(64), 4):
                v = d.read(arr, i)
                es.append(KcasEntry(arr, i, v, v + 4))
            if d.kcas(es):
                wins[t] += 1

    hammer(work, 4)
    assert sum(decode(d.read(arr, i)) for i in range(64)) == 4 * sum(wins)
    assert d.allocations == 8
    assert sum(wins) > 0


def test_racing_kcas_all_interleavings():
    """A 2-CAS and an overlapping 1-CAS from the same start: exactly one wins."""
    outcomes = set()

    class Ctx:
        pass

    def setup():
        # Logical threads are greenlets here, so they need their own slots.
        d = KcasDomain(greenlet.getcurrent)
        a = WordArray(2)
        ctx = Ctx()
        ctx.a, ctx.res, ctx.d = a, {}, d

        def op(name, pairs):
            def run():
                ctx.res[name] = d.kcas([KcasEntry(a, i, 0, v) for i, v in pairs])
            return run
        return ctx, [op("x", [(0, 4), (1, 4)]), op("y", [(1, 8)])]

    def check(ex):
        assert ex.error is None, ex.error
        c = ex.log
        outcomes.add((c.res["x"], c.res["y"], tuple(c.a.cells)))
        assert c.d.allocations == 4

    n = explore_dpor(setup, check)
    assert n > 100
    assert outcomes == {(True, False, (4, 4)), (False, True, (0, 8))}


def test_threads_get_separate_slots():
    d = KcasDomain()
    a = WordArray(8)

    def work():
        for i in range(8):
            d.kcas([KcasEntry(a, i, d.read(a, i), d.read(a, i) + 4)])

    ts = [threading.Thread(target=work) for _ in range(3)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert d.allocations == 3 * 2
