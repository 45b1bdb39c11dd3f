"""Reusable descriptors with sequence-number validation.

Each process owns one slot per descriptor type and reuses it for every
operation.  A handle names one abstract descriptor: it packs the slot
owner's process id and the slot's sequence number at creation time.  Once
the owner creates a new descriptor in the slot, every older handle is
stale.  Operations through a stale handle do nothing and return a default,
or INVALID.

Word layouts (Python ints, but kept within 64 bits):

  handle     seq << 16 | pid << 2 | flag     flag is one of the two low bits
  mutables   seq << MBITS | packed mutable fields

Each type reserves its own flag bit so a word in shared memory can say which
kind of descriptor it points to.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from . import sync as _sync
from .sync import cas_value

PID_BITS = 14
FLAG_BITS = 2
SEQ_SHIFT = PID_BITS + FLAG_BITS
MAX_PROCESSES = 1 << PID_BITS
SEQ_BITS = 64 - SEQ_SHIFT


class _Invalid:
    __slots__ = ()

    def __repr__(self):
        return "INVALID"

    def __bool__(self):
        return False


INVALID = _Invalid()


@dataclass(frozen=True)
class DescriptorType:
    """Field layout of one descriptor type.

    mutable is a tuple of (name, bit width); all of them share one word
    with the sequence number.  flag is the low bit that marks handles of
    this type in shared memory.
    """

    name: str
    immutable: tuple
    mutable: tuple = ()
    flag: int = 1

    def __post_init__(self):
        if self.flag not in (1, 2):
            raise ValueError("flag must be one of the two low bits")
        offs, pos = {}, 0
        for fname, bits in self.mutable:
            offs[fname] = (pos, (1 << bits) - 1)
            pos += bits
        object.__setattr__(self, "_offsets", offs)
        object.__setattr__(self, "mbits", pos)
        object.__setattr__(self, "_imm_index", {n: i for i, n in enumerate(self.immutable)})


class DescriptorSlot:
    """One process's reusable descriptor of one type."""

    __slots__ = ("dtype", "pid", "mutables", "imm")

    def __init__(self, dtype: DescriptorType, pid: int):
        self.dtype = dtype
        self.pid = pid
        self.mutables = 0
        self.imm = [None] * len(dtype.immutable)


class DescriptorSpace:
    """Slots for a fixed set of descriptor types, created lazily per process.

    Process ids are handed out to threads on first use.  ident, if given,
    names the current process instead of the OS thread (the model checker
    runs many logical threads on one OS thread).  allocations counts slots
    ever created; nothing is ever freed.
    """

    def __init__(self, types, ident=None):
        self.types = tuple(types)
        flags = [t.flag for t in self.types]
        if len(set(flags)) != len(flags):
            raise ValueError("descriptor types must use distinct flag bits")
        self._slots: dict = {}  # (type name, pid) -> slot
        self._lock = threading.Lock()
        self._local = threading.local()
        self._next_pid = 0
        self._ident = ident
        self._pids: dict = {}
        self.allocations = 0

    # Process identity ----------------------------------------------------

    def pid(self) -> int:
        if self._ident is not None:
            who = self._ident()
            p = self._pids.get(who)
            if p is None:
                p = self._pids[who] = self._fresh_pid()
            return p
        try:
            return self._local.pid
        except AttributeError:
            p = self._local.pid = self._fresh_pid()
            return p

    def _fresh_pid(self) -> int:
        with self._lock:
            p = self._next_pid
            if p >= MAX_PROCESSES:
                raise RuntimeError("process id space exhausted")
            self._next_pid += 1
        return p

    def _own_slot(self, dtype: DescriptorType) -> DescriptorSlot:
        p = self.pid()
        key = (dtype.name, p)
        s = self._slots.get(key)
        if s is None:
            s = DescriptorSlot(dtype, p)
            with self._lock:
                self._slots[key] = s
                self.allocations += 1
        return s

    def _slot(self, dtype: DescriptorType, handle: int) -> DescriptorSlot:
        return self._slots[(dtype.name, (handle >> FLAG_BITS) & (MAX_PROCESSES - 1))]

    # ADT operations -------------------------------------------------------

    def create_new(self, dtype: DescriptorType, immutables=(), mutables=None) -> int:
        """Reinitialize the caller's slot; returns a fresh, even-seq handle."""
        s = self._own_slot(dtype)
        mb = dtype.mbits
        seq = s.mutables >> mb
        h = _sync._hook
        # Odd sequence number while the fields are being rewritten.
        if h is not None:
            h(s, "mutables", True)
        s.mutables = (seq + 1) << mb
        if len(immutables) != len(dtype.immutable):
            raise ValueError(f"{dtype.name} takes {len(dtype.immutable)} immutable values")
        if h is not None:
            h(s, "imm", True)
        s.imm = list(immutables)
        packed = 0
        for fname, val in (mutables or {}).items():
            off, mask = dtype._offsets[fname]
            if val & ~mask:
                raise ValueError(f"{fname}={val} does not fit its field")
            packed |= val << off
        seq += 2
        if seq >> SEQ_BITS:
            raise OverflowError("sequence number overflow")
        if h is not None:
            h(s, "mutables", True)
        s.mutables = (seq << mb) | packed
        return (seq << SEQ_SHIFT) | (s.pid << FLAG_BITS) | dtype.flag

    @staticmethod
    def seq_of(handle: int) -> int:
        return handle >> SEQ_SHIFT

    def _read_word(self, s: DescriptorSlot) -> int:
        if _sync._hook is not None:
            _sync._hook(s, "mutables", False)
        return s.mutables

    def read_field(self, dtype: DescriptorType, handle: int, field: str, default=INVALID):
        """Current value of field, or default if the handle is stale."""
        s = self._slot(dtype, handle)
        seq = handle >> SEQ_SHIFT
        mb = dtype.mbits
        if field in dtype._offsets:
            w = self._read_word(s)
            if w >> mb != seq:
                return default
            off, mask = dtype._offsets[field]
            return (w >> off) & mask
        if _sync._hook is not None:
            _sync._hook(s, "imm", False)
        val = s.imm[dtype._imm_index[field]]
        if self._read_word(s) >> mb != seq:
            return default
        return val

    def read_immutables(self, dtype: DescriptorType, handle: int):
        """Tuple of all immutable values, or INVALID."""
        s = self._slot(dtype, handle)
        if _sync._hook is not None:
            _sync._hook(s, "imm", False)
        vals = tuple(s.imm)
        if self._read_word(s) >> dtype.mbits != handle >> SEQ_SHIFT:
            return INVALID
        return vals

    def cas_field(self, dtype: DescriptorType, handle: int, field: str, expected: int, new: int):
        """Single-field CAS inside the packed word; prior value or INVALID."""
        s = self._slot(dtype, handle)
        seq = handle >> SEQ_SHIFT
        mb = dtype.mbits
        off, mask = dtype._offsets[field]
        while True:
            w = self._read_word(s)
            if w >> mb != seq:
                return INVALID
            cur = (w >> off) & mask
            if cur != expected:
                return cur
            nw = (w & ~(mask << off)) | ((new & mask) << off)
            if cas_value(s, "mutables", w, nw):
                return cur

    def write_field(self, dtype: DescriptorType, handle: int, field: str, value: int) -> None:
        """Store value if the handle is still valid; silently ignored otherwise."""
        s = self._slot(dtype, handle)
        seq = handle >> SEQ_SHIFT
        mb = dtype.mbits
        off, mask = dtype._offsets[field]
        while True:
            w = self._read_word(s)
            if w >> mb != seq:
                return
            nw = (w & ~(mask << off)) | ((value & mask) << off)
            if cas_value(s, "mutables", w, nw):
                return
