"""LLX, SCX and VLX on data records, built from single-word compare-and-swap.

The only atomic primitive used is a compare-and-set on one attribute of one
object.  Python has no hardware CAS, so each CAS runs under one of a fixed
pool of striped locks.  No lock is ever held across a yield point or across
two shared-memory steps, so the algorithms above this layer stay lock-free
in structure: a thread stalled between steps never blocks anyone else.

Every shared-memory step calls the optional module hook first.  Schedulers
(the model checker, the stop-the-world sampler) install a hook to control or
pause threads at exactly those points.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

IN_PROGRESS = 0
COMMITTED = 1
ABORTED = 2

_NSTRIPES = 256
_LOCKS = [threading.Lock() for _ in range(_NSTRIPES)]

# hook(obj, field, is_write) runs before each shared access when set.
# is_write is False for reads, True for CAS steps and a Store for plain
# stores, which carries the value so schedulers can see that two stores of
# the same value commute.
_hook: Optional[Callable[[object, str, bool], None]] = None
# Per-record list of values ever held by record.info, for the P1 check.
_info_history: Optional[dict] = None
# Every DataRecord constructed while this is a list gets appended to it.
_registry: Optional[list] = None
# Optional checker run on V before each SCX (Constraint 2 debug aid).
_order_check: Optional[Callable[[Sequence["Snapshot"]], None]] = None


class Store:
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __bool__(self):
        return True

    def __repr__(self):
        return f"Store({self.value!r})"


def set_hook(fn: Optional[Callable[[object, str, bool], None]]) -> None:
    global _hook
    _hook = fn


def get_hook():
    return _hook


def set_order_check(fn) -> None:
    global _order_check
    _order_check = fn


class InfoHistoryError(AssertionError):
    """A record's info field was set to a value it held before."""


def enable_info_history() -> dict:
    """Start recording info values per record; returns the live table."""
    global _info_history
    _info_history = {}
    return _info_history


def disable_info_history() -> None:
    global _info_history
    _info_history = None


def enable_registry() -> list:
    global _registry
    _registry = []
    return _registry


def disable_registry() -> None:
    global _registry
    _registry = None


class ScxDescriptor:
    """State of one SCX attempt, shared with helpers.

    work bundles everything a helper needs: (V, infos, R, fld_rec, fld_idx,
    old, new).  Helpers read it in one step.  Once the outcome is decided it
    is dropped, so a finished descriptor no longer pins the records it
    touched and removed nodes can be freed by reference counting.  A helper
    that finds work gone knows the SCX already finished.
    """

    __slots__ = ("work", "state", "all_frozen")

    def __init__(self, V, infos, R, fld_rec, fld_idx, old, new):
        self.work = (V, infos, R, fld_rec, fld_idx, old, new)
        self.state = IN_PROGRESS
        self.all_frozen = False

    def __repr__(self):
        names = {IN_PROGRESS: "InProgress", COMMITTED: "Committed", ABORTED: "Aborted"}
        return f"<ScxDescriptor {names.get(self.state, self.state)}>"


def _dummy() -> ScxDescriptor:
    d = ScxDescriptor((), (), (), None, 0, None, None)
    d.state = COMMITTED
    d.all_frozen = True
    return d


# Every record starts out pointing here, so llx never sees a null info.
DUMMY = _dummy()


class DataRecord:
    """A node with mutable link fields plus the fields LLX/SCX need.

    Subclasses add their immutable payload as extra slots and must never
    reassign those after construction.
    """

    __slots__ = ("mut", "info", "marked", "__weakref__")

    def __init__(self, mut: list):
        self.mut = mut
        self.info = DUMMY
        self.marked = False
        if _registry is not None:
            _registry.append(self)

    def is_finalized(self) -> bool:
        return bool(self.marked) and self.info.state == COMMITTED


class _Outcome:
    __slots__ = ("name",)
    ok = False

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


FAIL = _Outcome("FAIL")
FINALIZED = _Outcome("FINALIZED")


class Snapshot:
    """Result of a successful llx: the record, the info seen and its links.

    Passing a snapshot to scx or vlx is what links that llx to the call.
    """

    __slots__ = ("record", "info", "values")
    ok = True

    def __init__(self, record, info, values):
        self.record = record
        self.info = info
        self.values = values

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"Snapshot({self.values!r})"


def cas_field(obj, name: str, expected, new) -> bool:
    """Atomically set obj.name to new if it currently is expected."""
    if _hook is not None:
        _hook(obj, name, True)
    with _LOCKS[(id(obj) >> 4) % _NSTRIPES]:
        if getattr(obj, name) is expected:
            setattr(obj, name, new)
            return True
    return False


def cas_value(obj, name: str, expected, new) -> bool:
    """Like cas_field, but compares by value; for fields holding ints."""
    if _hook is not None:
        _hook(obj, name, True)
    with _LOCKS[(id(obj) >> 4) % _NSTRIPES]:
        if getattr(obj, name) == expected:
            setattr(obj, name, new)
            return True
    return False


def cas_item(seq: list, idx: int, expected, new) -> bool:
    """Value-comparing CAS on one element of a shared list."""
    if _hook is not None:
        _hook(seq, idx, True)
    with _LOCKS[(id(seq) + idx) % _NSTRIPES]:
        if seq[idx] == expected:
            seq[idx] = new
            return True
    return False


def _cas_info(r: DataRecord, expected, new) -> bool:
    if _hook is not None:
        _hook(r, "info", True)
    with _LOCKS[(id(r) >> 4) % _NSTRIPES]:
        if r.info is not expected:
            return False
        r.info = new
    if _info_history is not None:
        seen = _info_history.setdefault(id(r), [r, expected])
        if any(v is new for v in seen[1:]):
            raise InfoHistoryError(f"info of {r!r} returned to an old value")
        seen.append(new)
    return True


def _cas_mut(r: DataRecord, idx: int, expected, new) -> bool:
    if _hook is not None:
        _hook(r, "mut", True)
    with _LOCKS[(id(r) >> 4) % _NSTRIPES]:
        if r.mut[idx] is expected:
            r.mut[idx] = new
            return True
    return False


def read_link(r: DataRecord, idx: int):
    """Plain read of one mutable field, visible to the hook."""
    if _hook is not None:
        _hook(r, "mut", False)
    return r.mut[idx]


def llx(r: DataRecord):
    """Snapshot r's mutable fields, or return FAIL / FINALIZED."""
    h = _hook
    if h is None:
        # Common case without a scheduler hook: an unfrozen record.
        marked1 = r.marked
        rinfo = r.info
        state = rinfo.state
        if state == ABORTED or (state == COMMITTED and not r.marked):
            values = r.mut[:]
            if r.info is rinfo:
                return Snapshot(r, rinfo, values)
        return _llx_slow(r, marked1, rinfo)
    h(r, "marked", False)
    marked1 = r.marked
    h(r, "info", False)
    rinfo = r.info
    h(rinfo, "state", False)
    state = rinfo.state
    h(r, "marked", False)
    marked2 = r.marked
    if state == ABORTED or (state == COMMITTED and not marked2):
        h(r, "mut", False)
        values = r.mut[:]
        h(r, "info", False)
        if r.info is rinfo:
            return Snapshot(r, rinfo, values)
    return _llx_slow(r, marked1, rinfo)


def _llx_slow(r: DataRecord, marked1, rinfo):
    h = _hook
    if h is not None:
        h(rinfo, "state", False)
    done = rinfo.state == COMMITTED
    if not done:
        if h is not None:
            h(rinfo, "state", False)
        done = rinfo.state == IN_PROGRESS and help_scx(rinfo)
    if done and marked1:
        return FINALIZED
    if h is not None:
        h(r, "info", False)
    cur = r.info
    if h is not None:
        h(cur, "state", False)
    if cur.state == IN_PROGRESS:
        help_scx(cur)
    return FAIL


def scx(V: Sequence[Snapshot], R: Sequence[DataRecord], fld, new) -> bool:
    """Store new into fld if no record in V changed since its linked llx.

    V holds the snapshots of the linked llx calls, in the caller's fixed
    traversal order.  R lists the records to finalize.  fld is a pair
    (record, index) naming one mutable field of a record in V.
    """
    if _order_check is not None:
        _order_check(V)
    rec, idx = fld
    old = None
    for s in V:
        if s.record is rec:
            old = s.values[idx]
            break
    else:
        raise ValueError("the record holding fld must be in V")
    d = ScxDescriptor([s.record for s in V], [s.info for s in V],
                      R, rec, idx, old, new)
    return help_scx(d)


def help_scx(d: ScxDescriptor) -> bool:
    """Drive d to completion; True iff d committed."""
    h = _hook
    if h is None and _info_history is None:
        return _help_plain(d)
    if h is not None:
        h(d, "work", False)
    work = d.work
    if work is None:
        # Released only after state was set to its final value.
        return d.state == COMMITTED
    V, infos, R, fld_rec, fld_idx, old, new = work
    for r, rinfo in zip(V, infos):
        if not _cas_info(r, rinfo, d):
            if h is not None:
                h(r, "info", False)
            if r.info is not d:
                if h is not None:
                    h(d, "all_frozen", False)
                if d.all_frozen:
                    return True
                if h is not None:
                    h(d, "state", Store(ABORTED))
                d.state = ABORTED
                if h is not None:
                    h(d, "work", Store(None))
                d.work = None
                return False
    if h is not None:
        h(d, "all_frozen", Store(True))
    d.all_frozen = True
    for r in R:
        if h is not None:
            h(r, "marked", Store(True))
        r.marked = True
    _cas_mut(fld_rec, fld_idx, old, new)
    if h is not None:
        h(d, "state", Store(COMMITTED))
    d.state = COMMITTED
    if h is not None:
        h(d, "work", Store(None))
    d.work = None
    return True


def _help_plain(d: ScxDescriptor) -> bool:
    # help_scx with no hook and no history check; same steps, fewer branches.
    work = d.work
    if work is None:
        return d.state == COMMITTED
    V, infos, R, fld_rec, fld_idx, old, new = work
    locks = _LOCKS
    for r, rinfo in zip(V, infos):
        with locks[(id(r) >> 4) % _NSTRIPES]:
            frozen = r.info is rinfo
            if frozen:
                r.info = d
        if not frozen and r.info is not d:
            if d.all_frozen:
                return True
            d.state = ABORTED
            d.work = None
            return False
    d.all_frozen = True
    for r in R:
        r.marked = True
    with locks[(id(fld_rec) >> 4) % _NSTRIPES]:
        if fld_rec.mut[fld_idx] is old:
            fld_rec.mut[fld_idx] = new
    d.state = COMMITTED
    d.work = None
    return True


def vlx(V: Sequence[Snapshot]) -> bool:
    """True iff no record in V changed since its linked llx."""
    h = _hook
    for s in V:
        if h is not None:
            h(s.record, "info", False)
        if s.record.info is not s.info:
            return False
    return True
