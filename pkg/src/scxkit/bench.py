"""Stress and throughput trials with checksum and structure validation.

A trial prefills the structure to its steady-state size, runs worker
threads on uniform random keys for a fixed time (or a fixed number of
operations), then checks at quiescence that

  * the sum of keys in the structure equals the sum of keys successfully
    inserted minus those successfully deleted (the checksum law), and
  * the structure's own validator finds nothing wrong.

The kcas "structure" is an array of counters incremented by k-CAS; its law
is that the array sum is k times the number of successful k-CAS operations.
"""

from __future__ import annotations

import csv
import io
import json
import random
import threading
import time
from dataclasses import asdict, dataclass, field

from .abtree import ABTree
from .chromatic import ChromaticTree
from .kcas import KcasDomain, KcasEntry, WordArray, decode
from .multiset import Multiset
from .ravl import RavlTree
from .reclaim import EpochReclaimer

STRUCTURES = ("multiset", "chromatic", "chromatic-k", "ravl", "ravl-k", "abtree", "kcas")

# Fixed output schema; CSV columns come out in this order.
REPORT_KEYS = ("ds", "threads", "keyrange", "u_ins", "u_del", "ops_total", "throughput_per_us",
               "checksum_ok", "valid", "size", "height", "avg_leaf_depth", "violations",
               "seconds", "seed")


class PrefillTimeout(RuntimeError):
    pass


@dataclass
class TrialConfig:
    ds: str = "chromatic"
    threads: int = 4
    keyrange: int = 10_000
    insert_pct: float = 50.0
    delete_pct: float = 50.0
    successor_pct: float = 0.0
    seconds: float = 1.0
    ops: int | None = None  # per-thread budget; overrides seconds when set
    seed: int = 0
    k_threshold: int = 4
    a: int = 6
    b: int = 16
    kcas_k: int = 16
    array_size: int = 1 << 20
    validate: bool = True
    reclaim: bool = True
    prefill_timeout: float = 60.0
    log_ops: bool = False


@dataclass
class TrialReport:
    ds: str
    threads: int
    keyrange: int
    u_ins: float
    u_del: float
    ops_total: int
    throughput_per_us: float
    checksum_ok: bool
    valid: bool
    size: int
    height: int | None
    avg_leaf_depth: float | None
    violations: int | None
    seconds: float
    seed: int
    per_thread_ops: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    op_log: list | None = None

    def row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in REPORT_KEYS}


# Structure adapters ---------------------------------------------------------
#
# insert and delete report whether they changed the key set.

class _DictAdapter:
    def __init__(self, tree):
        self.s = tree

    def insert(self, k) -> bool:
        return self.s.insert(k, 1) is None

    def delete(self, k) -> bool:
        return self.s.delete(k) is not None

    def get(self, k) -> None:
        self.s.get(k)

    def successor(self, k) -> None:
        self.s.successor(k)


class _MultisetAdapter:
    def __init__(self, ms: Multiset):
        self.s = ms

    def insert(self, k) -> bool:
        self.s.insert(k, 1)
        return True

    def delete(self, k) -> bool:
        return self.s.delete(k, 1)

    def get(self, k) -> None:
        self.s.get(k)

    def successor(self, k) -> None:
        raise ValueError("multiset has no successor operation")


def make_structure(cfg: TrialConfig, reclaimer=None):
    ds = cfg.ds
    if ds == "multiset":
        return Multiset(reclaimer)
    if ds == "chromatic":
        return ChromaticTree(reclaimer)
    if ds == "chromatic-k":
        return ChromaticTree(reclaimer, k_threshold=cfg.k_threshold)
    if ds == "ravl":
        return RavlTree(reclaimer)
    if ds == "ravl-k":
        return RavlTree(reclaimer, k_threshold=cfg.k_threshold)
    if ds == "abtree":
        return ABTree(cfg.a, cfg.b, reclaimer)
    raise ValueError(f"unknown structure {ds!r}")


def _adapter(s):
    return _MultisetAdapter(s) if isinstance(s, Multiset) else _DictAdapter(s)


def _size(s) -> int:
    if isinstance(s, Multiset):
        return sum(c for _, c in s.items())
    return len(s)


def steady_state(keyrange: int, insert_pct: float, delete_pct: float) -> float:
    """Expected size once inserts and deletes on uniform keys balance out."""
    if insert_pct + delete_pct <= 0:
        return keyrange / 2
    return keyrange * insert_pct / (insert_pct + delete_pct)


# Prefill ---------------------------------------------------------------------

def prefill(s, keyrange: int, threads: int, seed: int, insert_pct: float = 50.0,
            delete_pct: float = 50.0, timeout: float = 60.0) -> int:
    """Run inserts and deletes until the size is within 5% of steady state.

    Returns the key sum added.  With one thread the result is a function of
    the seed alone.
    """
    if keyrange <= 0:
        return 0
    target = steady_state(keyrange, insert_pct, delete_pct)
    lo, hi = 0.95 * target, 1.05 * target
    p_ins = 0.5 if insert_pct + delete_pct <= 0 else insert_pct / (insert_pct + delete_pct)
    ad = _adapter(s)
    multi = isinstance(s, Multiset)
    deltas = [0] * threads
    sizes = [0] * threads
    rngs = [random.Random(seed * 1_000_003 + 7919 * tid + 1) for tid in range(threads)]
    done = threading.Event()
    deadline = time.monotonic() + timeout

    def work(tid):
        rng = rngs[tid]
        d, n = deltas[tid], sizes[tid]
        while not done.is_set():
            for _ in range(16):
                k = rng.randrange(keyrange)
                if rng.random() < p_ins:
                    # The multiset keeps one copy per key here, so its
                    # size has the same steady state as the dictionaries.
                    if (not multi or not s.get(k)) and ad.insert(k):
                        d += k
                        n += 1
                elif ad.delete(k):
                    d -= k
                    n -= 1
            deltas[tid] = d
            sizes[tid] = n
            if tid == 0 and (lo <= sum(sizes) <= hi or time.monotonic() > deadline):
                done.set()

    # Threads other than 0 may finish a batch after the stop signal and push
    # the size back out of range; go again until it settles inside.
    while True:
        done.clear()
        _run_threads(work, threads)
        if lo <= sum(sizes) <= hi or time.monotonic() > deadline:
            break
    if not lo <= sum(sizes) <= hi:
        raise PrefillTimeout(f"size {sum(sizes)} not within 5% of {target:.0f} after {timeout}s")
    return sum(deltas)


def _run_threads(fn, n: int) -> None:
    if n == 1:
        fn(0)
        return
    errs = []

    def guarded(tid):
        try:
            fn(tid)
        except BaseException as e:  # surface worker failures to the caller
            errs.append(e)

    ts = [threading.Thread(target=guarded, args=(t,)) for t in range(n)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    if errs:
        raise errs[0]


# Trials ------------------------------------------------------------------------

def run_trial(cfg: TrialConfig) -> TrialReport:
    if cfg.ds == "kcas":
        return _run_kcas(cfg)
    if cfg.ds not in STRUCTURES:
        raise ValueError(f"unknown structure {cfg.ds!r}")
    total_pct = cfg.insert_pct + cfg.delete_pct + cfg.successor_pct
    if total_pct > 100 or min(cfg.insert_pct, cfg.delete_pct, cfg.successor_pct) < 0:
        raise ValueError("operation percentages must be non-negative and sum to at most 100")
    rc = EpochReclaimer() if cfg.reclaim else None
    s = make_structure(cfg, rc)
    if cfg.successor_pct and not hasattr(s, "successor"):
        raise ValueError(f"{cfg.ds} does not support successor queries")
    base = prefill(s, cfg.keyrange, cfg.threads, cfg.seed, cfg.insert_pct, cfg.delete_pct,
                   cfg.prefill_timeout)
    ad = _adapter(s)
    n = cfg.threads
    counts = [0] * n
    deltas = [0] * n
    logs = [[] for _ in range(n)] if cfg.log_ops else None
    stop = threading.Event()
    barrier = threading.Barrier(n + 1) if n > 1 else None
    p_ins = cfg.insert_pct / 100
    p_del = p_ins + cfg.delete_pct / 100
    p_succ = p_del + cfg.successor_pct / 100
    budget = cfg.ops

    crashes = []

    def work(tid):
        try:
            _work(tid)
        except BaseException as e:  # reported below, after the other threads stop
            crashes.append(f"thread {tid}: {type(e).__name__}: {e}")
            stop.set()
            if barrier is not None:
                barrier.abort()

    def _work(tid):
        rng = random.Random(cfg.seed * 1_000_003 + tid)
        keyrange = max(1, cfg.keyrange)
        log = logs[tid] if logs is not None else None
        c = d = 0
        if barrier is not None:
            barrier.wait()
        while not stop.is_set():
            for _ in range(32):
                k = rng.randrange(keyrange)
                r = rng.random()
                if r < p_ins:
                    if ad.insert(k):
                        d += k
                    op = "insert"
                elif r < p_del:
                    if ad.delete(k):
                        d -= k
                    op = "delete"
                elif r < p_succ:
                    ad.successor(k)
                    op = "successor"
                else:
                    ad.get(k)
                    op = "get"
                if log is not None:
                    log.append((op, k))
                c += 1
                if budget is not None and c >= budget:
                    break
            counts[tid] = c
            deltas[tid] = d
            if budget is not None and c >= budget:
                break

    t0 = time.perf_counter()
    if n == 1:
        if budget is None:
            threading.Timer(cfg.seconds, stop.set).start()
        work(0)
        stop.set()
    else:
        ts = [threading.Thread(target=work, args=(t,)) for t in range(n)]
        for t in ts:
            t.start()
        try:
            barrier.wait()
        except threading.BrokenBarrierError:
            pass
        t0 = time.perf_counter()
        if budget is None:
            stop.wait(cfg.seconds)
            stop.set()
        for t in ts:
            t.join()
    elapsed = time.perf_counter() - t0
    if rc is not None:
        rc.flush()
    errors = list(crashes)
    expected = base + sum(deltas)
    got = s.checksum()
    checksum_ok = got == expected
    if not checksum_ok:
        errors.append(f"checksum {got} != expected {expected}")
    valid = True
    if cfg.validate:
        strict = cfg.ds in ("chromatic", "ravl", "abtree")
        errs = s.validate() if isinstance(s, Multiset) else s.validate(strict=strict)
        if errs:
            valid = False
            errors.extend(errs[:10])
    tree = not isinstance(s, Multiset)
    ops_total = sum(counts)
    return TrialReport(
        ds=cfg.ds, threads=n, keyrange=cfg.keyrange, u_ins=cfg.insert_pct, u_del=cfg.delete_pct,
        ops_total=ops_total, throughput_per_us=ops_total / max(elapsed, 1e-9) / 1e6,
        checksum_ok=checksum_ok, valid=valid, size=_size(s),
        height=s.height() if tree else None,
        avg_leaf_depth=round(s.avg_leaf_depth(), 4) if tree else None,
        violations=s.violations() if tree else None,
        seconds=round(elapsed, 4), seed=cfg.seed, per_thread_ops=counts, errors=errors,
        op_log=[e for l in logs for e in l] if logs is not None else None,
    )


def _run_kcas(cfg: TrialConfig) -> TrialReport:
    dom = KcasDomain()
    size, k, n = cfg.array_size, cfg.kcas_k, cfg.threads
    if not 1 <= k <= size:
        raise ValueError("kcas k must be between 1 and the array size")
    arr = WordArray(size)
    counts = [0] * n
    attempts = [0] * n
    stop = threading.Event()
    budget = cfg.ops

    def work(tid):
        rng = random.Random(cfg.seed * 1_000_003 + tid)
        c = a = 0
        while not stop.is_set() and (budget is None or a < budget):
            idx = rng.sample(range(size), k)
            entries = []
            for i in idx:
                v = dom.read(arr, i)
                entries.append(KcasEntry(arr, i, v, v + 4))
            a += 1
            if dom.kcas(entries):
                c += 1
            counts[tid] = c
            attempts[tid] = a

    t0 = time.perf_counter()
    ts = [threading.Thread(target=work, args=(t,)) for t in range(n)]
    for t in ts:
        t.start()
    if budget is None:
        stop.wait(cfg.seconds)
        stop.set()
    for t in ts:
        t.join()
    elapsed = time.perf_counter() - t0
    total = sum(decode(dom.read(arr, i)) for i in range(size))
    ok_sum = total == k * sum(counts)
    errors = [] if ok_sum else [f"array sum {total} != {k} x {sum(counts)}"]
    valid = dom.allocations == 2 * n
    if not valid:
        errors.append(f"{dom.allocations} descriptor slots allocated, expected {2 * n}")
    return TrialReport(
        ds="kcas", threads=n, keyrange=size, u_ins=0.0, u_del=0.0, ops_total=sum(counts),
        throughput_per_us=sum(attempts) / max(elapsed, 1e-9) / 1e6, checksum_ok=ok_sum,
        valid=valid, size=size, height=None, avg_leaf_depth=None, violations=None,
        seconds=round(elapsed, 4), seed=cfg.seed, per_thread_ops=counts, errors=errors,
    )


def emit_report(report: TrialReport, fmt: str = "json", header: bool = True) -> str:
    row = report.row()
    if fmt == "json":
        return json.dumps(row)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=REPORT_KEYS, lineterminator="\n")
        if header:
            w.writeheader()
        w.writerow(row)
        return buf.getvalue().rstrip("\n")
    raise ValueError(f"unknown format {fmt!r}")
