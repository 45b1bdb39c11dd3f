"""DCSS and k-CAS over shared words, using reusable per-process descriptors.

A shared word is one element of a WordArray.  Application values must keep
the two low bits clear: bit 0 flags a DCSS handle, bit 1 a k-CAS handle.
encode/decode shift small integers in and out of that representation.

Each thread owns exactly one DCSS slot and one k-CAS slot for the lifetime
of the KcasDomain.  Helpers that find a stale handle know the operation it
named already finished, and return early.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import sync as _sync
from .descriptor import INVALID, DescriptorSpace, DescriptorType
from .sync import cas_item

DCSS_FLAG = 1
KCAS_FLAG = 2
FLAGS = DCSS_FLAG | KCAS_FLAG

UNDECIDED, SUCCEEDED, FAILED = 0, 1, 2
MAX_K = 64

DCSS_T = DescriptorType("dcss", ("addr1", "exp1", "array", "index", "exp2", "new2"),
                        flag=DCSS_FLAG)
KCAS_T = DescriptorType("kcas", ("entries",), (("state", 2),), flag=KCAS_FLAG)


def encode(v: int) -> int:
    return v << 2


def decode(w: int) -> int:
    return w >> 2


class WordArray:
    """Fixed-size array of shared words."""

    __slots__ = ("cells", "__weakref__")

    def __init__(self, n: int, fill: int = 0):
        _check_value(fill)
        self.cells = [fill] * n

    def __len__(self):
        return len(self.cells)

    def raw(self, i: int) -> int:
        if _sync._hook is not None:
            _sync._hook(self.cells, i, False)
        return self.cells[i]


def _check_value(v: int) -> None:
    if v & FLAGS:
        raise ValueError(f"value {v} uses a reserved flag bit")


@dataclass(frozen=True)
class KcasEntry:
    array: WordArray
    index: int
    expected: int
    new: int

    def addr(self):
        return (id(self.array), self.index)


class KcasDomain:
    """Owns the descriptor slots that DCSS and k-CAS operations run on."""

    def __init__(self, ident=None):
        self.space = DescriptorSpace((DCSS_T, KCAS_T), ident)

    @property
    def allocations(self) -> int:
        return self.space.allocations

    # DCSS ---------------------------------------------------------------
    #
    # The first address is always the state field of a k-CAS descriptor,
    # read with default SUCCEEDED: a stale handle means that k-CAS is over,
    # so it is no longer UNDECIDED.

    def dcss(self, kdes: int, exp1: int, arr: WordArray, i: int, exp2: int, new2: int) -> int:
        """If kdes.state == exp1 and arr[i] == exp2 then arr[i] := new2.

        Returns the value arr[i] held at the linearization point.
        """
        sp = self.space
        des = sp.create_new(DCSS_T, (kdes, exp1, arr, i, exp2, new2))
        cells = arr.cells
        while True:
            if cas_item(cells, i, exp2, des):
                r = exp2
                break
            r = arr.raw(i)
            if r & DCSS_FLAG:
                self._dcss_help(r)
                continue
            if r == exp2:
                # Changed back between the failed CAS and the read; retry.
                continue
            break
        if r == exp2:
            self._dcss_help(des)
        return r

    def _dcss_help(self, des: int) -> None:
        vals = self.space.read_immutables(DCSS_T, des)
        if vals is INVALID:
            return
        kdes, exp1, arr, i, exp2, new2 = vals
        state = self.space.read_field(KCAS_T, kdes, "state", SUCCEEDED)
        if state == exp1:
            cas_item(arr.cells, i, des, new2)
        else:
            cas_item(arr.cells, i, des, exp2)

    def dcss_read(self, arr: WordArray, i: int) -> int:
        while True:
            r = arr.raw(i)
            if r & DCSS_FLAG:
                self._dcss_help(r)
                continue
            return r

    # k-CAS --------------------------------------------------------------

    def kcas(self, entries) -> bool:
        """Atomically: if every word holds its expected value, write all new values."""
        entries = sorted(entries, key=KcasEntry.addr)
        if not 1 <= len(entries) <= MAX_K:
            raise ValueError(f"k must be between 1 and {MAX_K}")
        for a, b in zip(entries, entries[1:]):
            if a.addr() == b.addr():
                raise ValueError("addresses in one k-CAS must be distinct")
        for e in entries:
            _check_value(e.expected)
            _check_value(e.new)
        des = self.space.create_new(KCAS_T, (tuple(entries),), {"state": UNDECIDED})
        return self._kcas_help(des)

    def _kcas_help(self, des: int) -> bool:
        sp = self.space
        vals = sp.read_immutables(KCAS_T, des)
        if vals is INVALID:
            return False
        entries = vals[0]
        if sp.read_field(KCAS_T, des, "state", SUCCEEDED) == UNDECIDED:
            outcome = SUCCEEDED
            for e in entries:
                while True:
                    v = self.dcss(des, UNDECIDED, e.array, e.index, e.expected, des)
                    if v & KCAS_FLAG:
                        if v != des:
                            self._kcas_help(v)
                            continue
                    elif v != e.expected:
                        outcome = FAILED
                    break
                if outcome == FAILED:
                    break
            sp.cas_field(KCAS_T, des, "state", UNDECIDED, outcome)
        state = sp.read_field(KCAS_T, des, "state")
        if state is INVALID:
            return False
        ok = state == SUCCEEDED
        for e in entries:
            cas_item(e.array.cells, e.index, des, e.new if ok else e.expected)
        return ok

    def read(self, arr: WordArray, i: int) -> int:
        """Application value of arr[i], helping any operation that owns it."""
        while True:
            r = self.dcss_read(arr, i)
            if r & KCAS_FLAG:
                self._kcas_help(r)
                continue
            return r
