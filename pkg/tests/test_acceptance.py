"""Acceptance criteria, one test each.

Each test prints a single "criterion N: PASS|FAIL ..." line to the terminal
(even under output capture) and then asserts.  Run alone with

    pytest -v tests/test_acceptance.py
"""

import math
import random
import time

import pytest

import ravl_catalog
from helpers import hammer
from scxkit import sync
from scxkit.abtree import ABTree
from scxkit.bench import TrialConfig, run_trial
from scxkit.chromatic import ChromaticTree
from scxkit.kcas import KcasDomain, KcasEntry, WordArray, decode
from scxkit.modelcheck import SCENARIOS, check_llx_scx
from scxkit.multiset import Multiset
from scxkit.ravl import STEPS, RavlTree
from scxkit.reclaim import EpochReclaimer
from scxkit.sampler import sample_violations

# LLX/SCX scenarios with three threads on top of the canned ones.
EXTRA_SCENARIOS = {
    "two-record-vs-one": (
        {"a": [0], "b": [0]},
        [[("llx", "a"), ("llx", "b"), ("scx", ("a", "b"), (), ("b", 0))],
         [("llx", "b"), ("scx", ("b",), ("b",), ("b", 0))]],
    ),
    "ab-bc": (
        {"a": [0], "b": [0], "c": [0]},
        [[("llx", "a"), ("llx", "b"), ("scx", ("a", "b"), ("b",), ("a", 0))],
         [("llx", "b"), ("llx", "c"), ("scx", ("b", "c"), ("c",), ("b", 0))]],
    ),
    "chain-overlap": (
        {"a": [0], "b": [0], "c": [0]},
        [[("llx", "a"), ("llx", "b"), ("scx", ("a", "b"), ("b",), ("a", 0))],
         [("llx", "b"), ("scx", ("b",), (), ("b", 0))],
         [("llx", "a")]],
    ),
    "three-contend": (
        {"a": [0], "b": [0]},
        [[("llx", "a"), ("scx", ("a",), (), ("a", 0))],
         [("llx", "a"), ("scx", ("a",), ("a",), ("a", 0))],
         [("llx", "a"), ("vlx", ("a",))]],
    ),
}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_criterion_01_chromatic_quiescent_validity(report):
    t0 = time.monotonic()
    bad = []
    for seed in range(10):
        rep = run_trial(TrialConfig(ds="chromatic", threads=4, keyrange=10_000, seconds=2.0,
                                    seed=seed))
        bound = 2 * math.log2(rep.size + 1) + 1
        if not (rep.checksum_ok and rep.valid and rep.violations == 0 and rep.height <= bound):
            bad.append((seed, rep.errors[:3], rep.height, round(bound, 1)))
    took = time.monotonic() - t0
    report(1, not bad and took <= 60, f"10 trials, failures={bad}, {took:.1f}s")


def test_criterion_02_chromatic_sequential(report):
    t = ChromaticTree()
    t0 = time.monotonic()
    for i in range(100_000):
        t.insert(i, i)
    took = time.monotonic() - t0
    h, avg = t.height(), t.avg_leaf_depth()
    ok = h <= 40 and avg <= 22 and took <= 10 and t.validate(strict=True) == []
    report(2, ok, f"height {h}, avg leaf depth {avg:.2f}, {took:.1f}s")


def test_criterion_03_violation_bound(report):
    lines, ok = [], True
    for name, tree in (("chromatic", ChromaticTree()), ("ravl", RavlTree()),
                       ("abtree", ABTree(6, 16))):
        samples = sample_violations(tree, threads=8, keyrange=1000, samples=100, seed=3)
        over = [s for s in samples if s[0] > s[1]]
        ok = ok and len(samples) >= 100 and not over
        lines.append(f"{name}: {len(samples)} samples, max violations "
                     f"{max(v for v, _ in samples)}, {len(over)} over bound")
    report(3, ok, "; ".join(lines))


def test_criterion_04_ravl_quiescent_validity(report):
    bad = []
    for seed in range(10):
        rep = run_trial(TrialConfig(ds="ravl", threads=4, keyrange=2000, seconds=1.0,
                                    seed=seed))
        t = RavlTree()
        rng = random.Random(seed)
        for _ in range(3000):
            k = rng.randrange(3000)
            t.insert(k) if rng.random() < 0.6 else t.delete(k)
        for r_ok, n, h, errs in ((rep.checksum_ok and rep.valid, rep.size, rep.height, rep.errors),
                                 (not t.validate(strict=True), len(t), t.height(), [])):
            if not r_ok or h > 1.44 * math.log2(n + 2) + 2:
                bad.append((seed, errs[:3], n, h))
    report(4, not bad, f"10 concurrent + 10 sequential trials, failures={bad}")


def test_criterion_05_ravl_step_catalog(report):
    t0 = time.monotonic()
    counts, failures, seen = ravl_catalog.run_catalog()
    took = time.monotonic() - t0
    steps_hit = {s for s, _ in counts}
    ok = not failures and steps_hit == set(STEPS) and took <= 60
    report(5, ok, f"{seen} subtrees, {sum(counts.values())} step applications, "
                  f"{len(steps_hit)}/{len(STEPS)} steps, {len(failures)} failures, {took:.1f}s")


def test_criterion_06_abtree_quiescent_validity(report):
    bad = []
    for seed in range(10):
        rep = run_trial(TrialConfig(ds="abtree", threads=4, keyrange=10_000, seconds=1.0,
                                    seed=seed))
        bound = math.log(max(rep.size, 2), 6) + 3
        if not (rep.checksum_ok and rep.valid and rep.height <= bound):
            bad.append((seed, rep.errors[:3], rep.height, round(bound, 1)))
    report(6, not bad, f"10 trials (a=6, b=16), failures={bad}")


def test_criterion_07_multiset_oracle(report):
    ms = Multiset()
    ref = {}
    rng = random.Random(7)
    mismatches = 0
    for _ in range(100_000):
        k = rng.randrange(1000)
        r = rng.random()
        if r < 0.4:
            ms.insert(k)
            ref[k] = ref.get(k, 0) + 1
        elif r < 0.8:
            ok = ms.delete(k)
            if ok != (ref.get(k, 0) > 0):
                mismatches += 1
            if ok:
                ref[k] -= 1
                if not ref[k]:
                    del ref[k]
        elif ms.get(k) != ref.get(k, 0):
            mismatches += 1
    same = ms.items() == sorted(ref.items())

    rc = EpochReclaimer()
    shared = Multiset(rc)
    deltas = [0] * 8

    def work(t):
        g = random.Random(100 + t)
        for _ in range(2000):
            k = g.randrange(200)
            if g.random() < 0.5:
                shared.insert(k)
                deltas[t] += k
            elif shared.delete(k):
                deltas[t] -= k

    hammer(work, 8)
    rc.flush()
    law = shared.checksum() == sum(deltas) and shared.validate() == []
    report(7, same and not mismatches and law,
           f"oracle match={same}, mismatches={mismatches}, 8-thread checksum law={law}")


def test_criterion_08_kcas_sum_law(report):
    import threading
    n, size, k = 8, 1 << 20, 16
    dom = KcasDomain()
    arr = WordArray(size)
    wins = [0] * n
    stop = threading.Event()

    def work(t):
        rng = random.Random(t)
        while not stop.is_set():
            es = []
            for i in rng.sample(range(size), k):
                v = dom.read(arr, i)
                es.append(KcasEntry(arr, i, v, v + 4))
            if dom.kcas(es):
                wins[t] += 1

    ts = [threading.Thread(target=work, args=(t,)) for t in range(n)]
    for t in ts:
        t.start()
    time.sleep(2.0)
    stop.set()
    for t in ts:
        t.join()
    total = sum(decode(dom.read(arr, i)) for i in range(size))
    ok = total == k * sum(wins) and dom.allocations == 2 * n and sum(wins) > 0
    report(8, ok, f"sum {total} vs {k} x {sum(wins)}, descriptor slots {dom.allocations}")


def test_criterion_09_llx_scx_linearizability(report):
    lines, ok = [], True
    for name, (init, progs) in {**SCENARIOS, **EXTRA_SCENARIOS}.items():
        rep = check_llx_scx(init, progs, check_p1=True)
        ok = ok and rep.ok
        lines.append(f"{name}={rep.executions}{'' if rep.ok else ' BAD'}")
    report(9, ok, "executions per scenario: " + ", ".join(lines))


def test_criterion_10_reclamation_safety(report):
    makers = {"multiset": Multiset, "chromatic": ChromaticTree, "ravl": RavlTree,
              "abtree": lambda rc: ABTree(6, 16, rc)}
    lines, ok = [], True

    def stress(s):
        def work(t):
            rng = random.Random(t)
            for _ in range(3000):
                k = rng.randrange(500)
                s.insert(k, 1) if rng.random() < 0.5 else s.delete(k)
        hammer(work, 4)

    for name, mk in makers.items():
        # Freed nodes are poisoned; any later touch raises UseAfterFree.
        rc = EpochReclaimer(advance_every=4)
        s = mk(rc)
        stress(s)
        rc.flush()
        errs = s.validate() if name == "multiset" else s.validate(strict=True)
        safe = not errs and rc.freed == rc.retired > 0
        # Leak accounting with freeing off.
        reg = sync.enable_registry()
        try:
            rc2 = EpochReclaimer(enabled=False)
            stress(mk(rc2))
        finally:
            sync.disable_registry()
        fin = sum(1 for r in reg if r.is_finalized())
        ok = ok and safe and rc2.retired == fin
        lines.append(f"{name}: freed {rc.freed}/{rc.retired}, retired {rc2.retired} "
                     f"finalized {fin}")
    report(10, ok, "; ".join(lines))
