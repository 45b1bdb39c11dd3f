"""Sorted linked-list multiset: keys with occurrence counts."""

from __future__ import annotations

from math import inf

from .sync import DataRecord, llx, scx

COUNT, NEXT = 0, 1


class ListNode(DataRecord):
    __slots__ = ("key",)

    def __init__(self, key, count: int, nxt):
        DataRecord.__init__(self, [count, nxt])
        self.key = key

    @property
    def count(self) -> int:
        return self.mut[COUNT]

    @property
    def next(self):
        return self.mut[NEXT]

    def __repr__(self):
        return f"ListNode({self.key!r}, {self.mut[COUNT]!r})"


class Multiset:
    """Lock-free multiset over keys strictly between -inf and +inf."""

    def __init__(self, reclaimer=None):
        self.tail = ListNode(inf, 0, None)
        self.head = ListNode(-inf, 0, self.tail)
        self.rc = reclaimer

    def _search(self, key):
        p = self.head
        r = p.mut[NEXT]
        while key > r.key:
            p = r
            r = r.mut[NEXT]
        return r, p

    def get(self, key) -> int:
        rc = self.rc
        if rc is not None:
            rc.guard_enter()
        try:
            r, _ = self._search(key)
            return r.mut[COUNT] if r.key == key else 0
        finally:
            if rc is not None:
                rc.guard_exit()

    def insert(self, key, count: int = 1) -> None:
        if count <= 0:
            raise ValueError("count must be positive")
        rc = self.rc
        if rc is not None:
            rc.guard_enter()
        try:
            while True:
                r, p = self._search(key)
                if key == r.key:
                    sr = llx(r)
                    if sr.ok and scx((sr,), (), (r, COUNT), sr[COUNT] + count):
                        return
                else:
                    sp = llx(p)
                    if sp.ok and sp[NEXT] is r:
                        if scx((sp,), (), (p, NEXT), ListNode(key, count, r)):
                            return
        finally:
            if rc is not None:
                rc.guard_exit()

    def delete(self, key, count: int = 1) -> bool:
        """Remove count occurrences; False if fewer than count are present."""
        if count <= 0:
            raise ValueError("count must be positive")
        rc = self.rc
        if rc is not None:
            rc.guard_enter()
        try:
            while True:
                r, p = self._search(key)
                sp = llx(p)
                sr = llx(r)
                if not (sp.ok and sr.ok and sp[NEXT] is r):
                    continue
                if key != r.key or sr[COUNT] < count:
                    return False
                if sr[COUNT] > count:
                    # r must be in V as well as R: the copy is built from its
                    # snapshot, so a change to r has to make this SCX fail.
                    new = ListNode(r.key, sr[COUNT] - count, sr[NEXT])
                    if scx((sp, sr), (r,), (p, NEXT), new):
                        self._retire((r,))
                        return True
                else:
                    rnext = sr[NEXT]
                    sn = llx(rnext)
                    if sn.ok:
                        new = ListNode(rnext.key, sn[COUNT], sn[NEXT])
                        if scx((sp, sr, sn), (r, rnext), (p, NEXT), new):
                            self._retire((r, rnext))
                            return True
        finally:
            if rc is not None:
                rc.guard_exit()

    def _retire(self, nodes) -> None:
        if self.rc is not None:
            for n in nodes:
                self.rc.retire(n)

    # Quiescent helpers -------------------------------------------------

    def items(self) -> list[tuple]:
        out = []
        r = self.head.mut[NEXT]
        while r.key != inf:
            out.append((r.key, r.mut[COUNT]))
            r = r.mut[NEXT]
        return out

    def checksum(self) -> int:
        return sum(k * c for k, c in self.items())

    def __len__(self) -> int:
        return len(self.items())

    def validate(self) -> list[str]:
        """Problems found at quiescence; empty when the list is well formed."""
        errs = []
        prev = self.head
        if prev.key != -inf or prev.mut[COUNT] != 0:
            errs.append("bad head sentinel")
        r = prev.mut[NEXT]
        while r is not None:
            if r.is_finalized():
                errs.append(f"reachable node {r.key!r} is finalized")
            if not r.key > prev.key:
                errs.append(f"keys not increasing at {r.key!r}")
            if r.key == inf:
                if r.mut[COUNT] != 0 or r.mut[NEXT] is not None:
                    errs.append("bad tail sentinel")
            elif r.mut[COUNT] <= 0:
                errs.append(f"non-positive count at {r.key!r}")
            prev, r = r, r.mut[NEXT]
        if prev.key != inf:
            errs.append("list does not end at the tail sentinel")
        return errs
