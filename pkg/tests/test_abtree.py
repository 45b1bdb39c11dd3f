import math
import random

import pytest

from helpers import concurrent_checksum, dict_oracle_run
from scxkit.abtree import ABTree, _internal, _leaf
from scxkit.reclaim import EpochReclaimer


@pytest.mark.parametrize("ab", [(2, 3), (3, 5), (6, 16)])
def test_oracle(ab):
    for seed in range(6):
        t = ABTree(*ab, debug=True)
        dict_oracle_run(t, 1500, 400, seed, check_every=97)
        assert t.validate(strict=True) == []


def test_parameters_checked():
    with pytest.raises(ValueError):
        ABTree(6, 10)
    with pytest.raises(ValueError):
        ABTree(1, 4)


def test_empty():
    t = ABTree()
    assert t.get(0) is None and t.delete(0) is None
    assert t.root().leaf and t.root().d == 0
    assert t.validate(strict=True) == []


def test_overflow_splits_nine_eight():
    t = ABTree(6, 16)
    for k in range(16):
        t.insert(k)
    assert t.root().leaf and t.root().d == 16
    t.insert(16)
    root = t.root()
    assert not root.leaf and not root.tag  # cleanup untagged the new root
    assert [c.d for c in root.mut] == [9, 8]
    assert root.keys == (9,)


def test_delete_at_a_creates_violation_and_cleanup_fixes_it():
    t = ABTree(6, 16)
    for k in range(17):
        t.insert(k)
    assert [c.d for c in t.root().mut] == [9, 8]
    for k in (16, 15):
        t.delete(k)
    # Right leaf now has a; one more delete would leave a - 1, so cleanup
    # must merge or redistribute.
    t.delete(14)
    assert t.validate(strict=True) == []
    assert t.keys() == list(range(14))


def _tree_with(a, b, leaf_sizes):
    """A two-level tree whose root has leaves of the given sizes."""
    t = ABTree(a, b)
    leaves, seps, k = [], [], 0
    for i, n in enumerate(leaf_sizes):
        ks = tuple(range(k, k + n))
        leaves.append(_leaf(ks, ks))
        if i:
            seps.append(k)
        k += n + 10
    t.entry.mut[0] = _internal(tuple(seps), leaves)
    return t


def test_absorb_sibling_merges():
    t = _tree_with(6, 16, [6, 3, 8])
    assert t.violations() == 1
    t._cleanup(t.root().mut[1].keys[0])
    assert t.validate(strict=True) == []
    assert [c.d for c in t.root().mut] == [9, 8] or [c.d for c in t.root().mut] == [6, 11]


def test_absorb_sibling_degree_five():
    # l.d = 2, s.d = 3 with a = 6: merged into one leaf of degree 5.
    t = _tree_with(6, 16, [2, 3, 9])
    t._absorb_sibling(t.entry, 0, t.root(), 0, t.root().mut[0], 1, t.root().mut[1])
    assert [c.d for c in t.root().mut] == [5, 9]
    assert t.validate() == []


def test_distribute_evens_out():
    # (a - 1, a + 3) -> (a + 1, a + 1)
    t = _tree_with(6, 16, [5, 9, 9])
    r = t.root()
    t._distribute(t.entry, 0, r, 0, r.mut[0], 1, r.mut[1])
    assert [c.d for c in t.root().mut] == [7, 7, 9]
    assert t.validate(strict=True) == []


def test_absorb_child_to_full_degree():
    # p.d + l.d = b + 1 merges into a node of degree b.
    a, b = 6, 16
    t = ABTree(a, b)
    leaves = [_leaf((10 * i,), (0,)) for i in range(b)]
    tagged = _internal((10 * (b - 1),), leaves[b - 2:], tag=True)
    kids = leaves[:b - 2] + [tagged]
    t.entry.mut[0] = _internal(tuple(10 * i for i in range(1, b - 1)), kids)
    r = t.root()
    assert r.d + tagged.d == b + 1
    t._absorb_child(t.entry, 0, r, b - 2, tagged)
    assert t.root().d == b and not t.root().tag


def test_sequential_height_bound():
    t = ABTree()
    n = 20000
    keys = list(range(n))
    random.Random(1).shuffle(keys)
    for k in keys:
        t.insert(k)
    assert t.validate(strict=True) == []
    assert t.height() <= math.log(n, 6) + 3


def test_concurrent_checksum_and_validity():
    rc = EpochReclaimer()
    t = ABTree(6, 16, rc)
    got, exp = concurrent_checksum(t, 4, 1500, 500)
    rc.flush()
    assert got == exp
    assert t.validate(strict=True) == []
