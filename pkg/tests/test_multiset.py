import random

import pytest

from helpers import hammer
from scxkit.multiset import Multiset
from scxkit.reclaim import EpochReclaimer


def test_insert_get_delete():
    ms = Multiset()
    assert ms.get(3) == 0
    ms.insert(3)
    ms.insert(3, 2)
    assert ms.get(3) == 3
    assert ms.delete(3, 2)
    assert ms.get(3) == 1
    assert not ms.delete(3, 2)
    assert ms.delete(3)
    assert ms.get(3) == 0
    assert ms.items() == []
    assert ms.validate() == []


def test_counts_must_be_positive():
    ms = Multiset()
    with pytest.raises(ValueError):
        ms.insert(1, 0)
    with pytest.raises(ValueError):
        ms.delete(1, -1)


def test_matches_counter_oracle():
    ms = Multiset()
    ref = {}
    rng = random.Random(5)
    for i in range(5000):
        k = rng.randrange(100)
        c = rng.randrange(1, 4)
        if rng.random() < 0.55:
            ms.insert(k, c)
            ref[k] = ref.get(k, 0) + c
        else:
            ok = ms.delete(k, c)
            assert ok == (ref.get(k, 0) >= c)
            if ok:
                ref[k] -= c
                if not ref[k]:
                    del ref[k]
    assert ms.items() == sorted(ref.items())
    assert ms.validate() == []


def test_concurrent_checksum_with_reclamation():
    rc = EpochReclaimer()
    ms = Multiset(rc)
    deltas = [0] * 4

    def work(t):
        rng = random.Random(t)
        d = 0
        for _ in range(1500):
            k = rng.randrange(50)
            if rng.random() < 0.5:
                ms.insert(k)
                d += k
            elif ms.delete(k):
                d -= k
        deltas[t] = d

    hammer(work, 4)
    rc.flush()
    assert ms.checksum() == sum(deltas)
    assert ms.validate() == []
    assert rc.freed == rc.retired > 0
