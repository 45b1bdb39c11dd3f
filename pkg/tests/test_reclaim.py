import random

import pytest

from helpers import hammer
from scxkit import sync
from scxkit.abtree import ABTree
from scxkit.chromatic import ChromaticTree
from scxkit.modelcheck import Cell
from scxkit.multiset import Multiset
from scxkit.ravl import RavlTree
from scxkit.reclaim import POISON, EpochReclaimer, ReclaimError, UseAfterFree, poison
from scxkit.sync import llx, scx

MAKERS = {
    "multiset": Multiset,
    "chromatic": ChromaticTree,
    "ravl": RavlTree,
    "abtree": lambda rc: ABTree(6, 16, rc),
}


def _finalized_cell():
    c = Cell("c", [0])
    assert scx((llx(c),), (c,), (c, 0), 1)
    return c


def test_poisoned_node_raises_on_use():
    c = _finalized_cell()
    poison(c)
    with pytest.raises(UseAfterFree):
        c.mut[0]
    with pytest.raises(UseAfterFree):
        c.info.state
    with pytest.raises(UseAfterFree):
        bool(POISON)


def test_freed_only_after_two_epochs():
    rc = EpochReclaimer(advance_every=1)
    c = _finalized_cell()
    rc.guard_enter()
    rc.retire(c)
    rc.guard_exit()
    assert rc.freed == 0 and rc.pending() == 1
    for _ in range(3):
        rc.guard_enter()
        rc.guard_exit()
    assert rc.freed == 1 and rc.pending() == 0
    with pytest.raises(UseAfterFree):
        c.mut[0]


def test_active_guard_holds_epoch_back():
    import threading
    rc = EpochReclaimer(advance_every=1)
    entered, release = threading.Event(), threading.Event()

    def reader():
        rc.guard_enter()
        entered.set()
        release.wait()
        rc.guard_exit()

    t = threading.Thread(target=reader)
    t.start()
    entered.wait()
    e = rc.epoch
    for _ in range(5):
        rc.guard_enter()
        rc.guard_exit()
    assert rc.epoch <= e + 1
    release.set()
    t.join()


def test_retire_requires_finalized_node():
    rc = EpochReclaimer()
    with pytest.raises(ReclaimError):
        rc.retire(Cell("live", [0]))


def test_double_retire_detected():
    rc = EpochReclaimer()
    c = _finalized_cell()
    rc.retire(c)
    with pytest.raises(ReclaimError):
        rc.retire(c)


def test_unbalanced_guard_exit():
    with pytest.raises(ReclaimError):
        EpochReclaimer().guard_exit()


def _stress(s, threads=4, ops=1500, keyspace=300):
    def work(t):
        rng = random.Random(t)
        for _ in range(ops):
            k = rng.randrange(keyspace)
            if rng.random() < 0.5:
                s.insert(k, 1)
            else:
                s.delete(k)
    hammer(work, threads)


def _validate(s):
    return s.validate() if isinstance(s, Multiset) else s.validate(strict=True)


@pytest.mark.parametrize("name", sorted(MAKERS))
def test_stress_with_poisoning_is_clean(name):
    rc = EpochReclaimer(advance_every=4)
    s = MAKERS[name](rc)
    _stress(s)
    rc.flush()
    assert rc.retired > 0 and rc.freed == rc.retired
    assert _validate(s) == []


@pytest.mark.parametrize("name", sorted(MAKERS))
def test_retired_equals_finalized_without_reclamation(name):
    reg = sync.enable_registry()
    try:
        rc = EpochReclaimer(enabled=False)
        s = MAKERS[name](rc)
        _stress(s, ops=800)
    finally:
        sync.disable_registry()
    finalized = sum(1 for r in reg if r.is_finalized())
    assert rc.retired == finalized > 0
    assert rc.freed == 0
