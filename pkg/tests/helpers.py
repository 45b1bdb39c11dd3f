"""Shared helpers for the structure tests."""

import random
import sys
import threading


def dict_oracle_run(tree, ops: int, keyspace: int, seed: int, check_every: int = 50,
                    successor: bool = False):
    """Random inserts and deletes against a dict; returns the oracle."""
    rng = random.Random(seed)
    ref = {}
    for i in range(ops):
        k = rng.randrange(keyspace)
        if rng.random() < 0.5:
            assert tree.insert(k, i) == ref.get(k)
            ref[k] = i
        else:
            assert tree.delete(k) == ref.pop(k, None)
        if i % check_every == 0:
            errs = tree.validate()
            assert not errs, errs
            assert tree.get(k) == ref.get(k)
            if successor:
                q = rng.randrange(-1, keyspace + 1)
                exp = min(((a, b) for a, b in ref.items() if a > q), default=None)
                assert tree.successor(q) == exp
    assert tree.items() == sorted(ref.items())
    return ref


def hammer(fn, threads: int, switch: float = 1e-4):
    """Run fn(tid) on several threads at a small switch interval; re-raise failures."""
    old = sys.getswitchinterval()
    sys.setswitchinterval(switch)
    errs = []

    def guarded(t):
        try:
            fn(t)
        except BaseException as e:
            errs.append(e)

    ts = [threading.Thread(target=guarded, args=(t,)) for t in range(threads)]
    try:
        for t in ts:
            t.start()
        for t in ts:
            t.join()
    finally:
        sys.setswitchinterval(old)
    if errs:
        raise errs[0]


def concurrent_checksum(tree, threads: int, ops: int, keyspace: int, seed: int = 0):
    """Concurrent inserts and deletes; returns (structure checksum, expected)."""
    deltas = [0] * threads

    def work(t):
        rng = random.Random(seed * 101 + t)
        d = 0
        for _ in range(ops):
            k = rng.randrange(keyspace)
            if rng.random() < 0.5:
                if tree.insert(k, 1) is None:
                    d += k
            elif tree.delete(k) is not None:
                d -= k
        deltas[t] = d

    hammer(work, threads)
    return tree.checksum(), sum(deltas)
