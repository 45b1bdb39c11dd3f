"""Stop-the-world sampling of a structure under concurrent updates.

Workers park at their next synchronization step (the sync hook) or at an
explicit checkpoint between operations.  Once every live worker is parked,
the sampler runs a probe over the frozen structure and releases them.  No
worker is ever parked while holding a stripe lock, since the hook runs
before the lock is taken.

Each worker keeps a flag saying whether it is inside an update; the sum of
those flags is the number of incomplete updates at the sample.
"""

from __future__ import annotations

import threading

from . import sync


class StopTheWorld:
    def __init__(self, nworkers: int):
        self.nworkers = nworkers
        self._cond = threading.Condition()
        self._requested = False
        self._parked = 0
        self._alive = nworkers
        self._workers: set = set()
        self.in_update = [0] * nworkers

    def register(self) -> None:
        with self._cond:
            self._workers.add(threading.get_ident())

    def retire_worker(self) -> None:
        with self._cond:
            self._workers.discard(threading.get_ident())
            self._alive -= 1
            self._cond.notify_all()

    def hook(self, obj, fld, is_write) -> None:
        if self._requested:
            self._park()

    def checkpoint(self) -> None:
        if self._requested:
            self._park()

    def _park(self) -> None:
        if threading.get_ident() not in self._workers:
            return
        with self._cond:
            if not self._requested:
                return
            self._parked += 1
            self._cond.notify_all()
            while self._requested:
                self._cond.wait()
            self._parked -= 1

    def sample(self, probe, timeout: float = 10.0):
        """Run probe() with all workers parked; returns its result, or None
        if the workers could not be stopped in time."""
        with self._cond:
            self._requested = True
            ok = self._cond.wait_for(lambda: self._parked >= self._alive, timeout)
            try:
                return probe() if ok else None
            finally:
                self._requested = False
                self._cond.notify_all()

    def install(self) -> None:
        sync.set_hook(self.hook)

    def uninstall(self) -> None:
        sync.set_hook(None)


def sample_violations(tree, threads: int = 8, keyrange: int = 1000, samples: int = 100,
                      interval: float = 0.01, seed: int = 0, prefill: bool = True,
                      switch_interval: float | None = 1e-4):
    """Stress tree with inserts and deletes and sample it stop-the-world.

    Returns a list of (violations, incomplete updates) pairs, one per sample.
    """
    import random
    import sys
    import time

    if prefill:
        rng = random.Random(seed)
        for k in rng.sample(range(keyrange), keyrange // 2):
            tree.insert(k, 1)
    stw = StopTheWorld(threads)
    stop = threading.Event()
    errors = []

    def work(tid):
        stw.register()
        rng = random.Random(seed * 7919 + tid + 1)
        try:
            while not stop.is_set():
                stw.checkpoint()
                k = rng.randrange(keyrange)
                stw.in_update[tid] = 1
                if rng.random() < 0.5:
                    tree.insert(k, 1)
                else:
                    tree.delete(k)
                stw.in_update[tid] = 0
        except BaseException as e:  # re-raised in the caller
            errors.append(e)
        finally:
            stw.in_update[tid] = 0
            stw.retire_worker()

    old_switch = sys.getswitchinterval()
    if switch_interval is not None:
        sys.setswitchinterval(switch_interval)
    stw.install()
    ts = [threading.Thread(target=work, args=(t,)) for t in range(threads)]
    out = []
    try:
        for t in ts:
            t.start()
        while len(out) < samples and not errors:
            time.sleep(interval)
            r = stw.sample(lambda: (tree.violations(), sum(stw.in_update)))
            if r is not None:
                out.append(r)
    finally:
        stop.set()
        for t in ts:
            t.join()
        stw.uninstall()
        sys.setswitchinterval(old_switch)
    if errors:
        raise errors[0]
    return out
