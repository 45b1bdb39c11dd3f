"""Epoch-based reclamation for nodes removed by SCX.

Python's garbage collector already keeps reachable objects alive, so the
point of this module is to enforce and test the discipline a manual-memory
build would need.  A "freed" node has every slot overwritten with POISON,
which raises UseAfterFree on nearly any use.  A premature free therefore
crashes the thread that touches the node instead of going unnoticed.
"""

from __future__ import annotations

import os
import threading
from collections import deque


class UseAfterFree(RuntimeError):
    pass


class ReclaimError(AssertionError):
    pass


class _Poison:
    __slots__ = ()

    def _die(self, *args, **kwargs):
        raise UseAfterFree("access to a reclaimed node")

    def __getattr__(self, name):
        raise UseAfterFree(f"read of .{name} on a reclaimed node")

    __getitem__ = __setitem__ = __iter__ = __len__ = __bool__ = _die
    __lt__ = __le__ = __gt__ = __ge__ = __eq__ = __ne__ = _die
    __index__ = __int__ = __float__ = __hash__ = __call__ = _die
    __add__ = __radd__ = __sub__ = __rsub__ = __neg__ = _die

    def __repr__(self):
        return "<POISON>"


POISON = _Poison()


def _slots_of(cls):
    names = []
    for klass in cls.__mro__:
        for s in getattr(klass, "__slots__", ()):
            if s != "__weakref__" and s not in names:
                names.append(s)
    return names


_SLOT_CACHE: dict = {}


def poison(node) -> None:
    cls = type(node)
    names = _SLOT_CACHE.get(cls)
    if names is None:
        names = _SLOT_CACHE[cls] = _slots_of(cls)
    for name in names:
        object.__setattr__(node, name, POISON)


class _ThreadState:
    __slots__ = ("active", "announced", "limbo", "entries", "depth")

    def __init__(self):
        self.active = False
        self.announced = 0
        self.limbo = deque()
        self.entries = 0
        self.depth = 0


class EpochReclaimer:
    """Three-epoch reclamation with per-thread limbo lists.

    A node retired while the global epoch is e is freed once the global
    epoch reaches e + 2: by then every thread still inside a guard entered
    it after the node was unlinked.  With enabled=False retire only counts,
    which is how the leak-accounting check runs.
    """

    def __init__(self, enabled: bool = True, poison_freed: bool = True,
                 advance_every: int | None = None, debug: bool = True):
        self.enabled = enabled
        self.poison_freed = poison_freed
        if advance_every is None:
            advance_every = int(os.environ.get("SCXKIT_EPOCH_FREQ", "32"))
        self.advance_every = max(1, advance_every)
        self.debug = debug
        self.epoch = 0
        self._epoch_lock = threading.Lock()
        self._local = threading.local()
        self._states: list[_ThreadState] = []
        self._states_lock = threading.Lock()
        self._count_lock = threading.Lock()
        self.retired = 0
        self.freed = 0

    def _state(self) -> _ThreadState:
        try:
            return self._local.state
        except AttributeError:
            st = _ThreadState()
            self._local.state = st
            with self._states_lock:
                self._states.append(st)
            return st

    def guard_enter(self) -> None:
        st = self._state()
        if st.depth:
            st.depth += 1
            return
        st.depth = 1
        st.announced = self.epoch
        st.active = True
        st.entries += 1
        if st.entries % self.advance_every == 0:
            self.try_advance()
        self._free_ready(st)

    def guard_exit(self) -> None:
        st = self._state()
        if st.depth <= 0:
            raise ReclaimError("guard_exit without matching guard_enter")
        st.depth -= 1
        if st.depth == 0:
            st.active = False

    def in_guard(self) -> bool:
        return self._state().depth > 0

    def retire(self, node) -> None:
        if self.debug:
            if not node.is_finalized():
                raise ReclaimError(f"retiring a node that is not finalized: {node!r}")
        with self._count_lock:
            self.retired += 1
        if not self.enabled:
            return
        st = self._state()
        if self.debug and any(n is node for _, n in st.limbo):
            raise ReclaimError("node retired twice")
        st.limbo.append((self.epoch, node))

    def try_advance(self) -> bool:
        e = self.epoch
        for st in list(self._states):
            if st.active and st.announced != e:
                return False
        with self._epoch_lock:
            if self.epoch == e:
                self.epoch = e + 1
                return True
        return False

    def _free_ready(self, st: _ThreadState) -> None:
        limit = self.epoch - 2
        limbo = st.limbo
        n = 0
        while limbo and limbo[0][0] <= limit:
            _, node = limbo.popleft()
            if self.poison_freed:
                poison(node)
            n += 1
        if n:
            with self._count_lock:
                self.freed += n

    def pending(self) -> int:
        return sum(len(st.limbo) for st in self._states)

    def flush(self) -> None:
        """Free everything; only legal when no thread is inside a guard."""
        for st in self._states:
            if st.active:
                raise ReclaimError("flush while a guard is active")
        with self._epoch_lock:
            self.epoch += 2
        for st in self._states:
            self._free_ready(st)
