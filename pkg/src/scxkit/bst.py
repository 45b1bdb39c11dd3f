"""Shared pieces of the leaf-oriented search trees.

Keys live in leaves; an internal node with key k routes keys < k left and
keys >= k right.  Two sentinel keys of +inf sit at the top so every real
node has a parent and a grandparent.  With the sentinels in place the
user-visible tree is entry.left.left once the first key has been inserted.
"""

from __future__ import annotations

from math import inf

from .sync import DataRecord, scx
from .template import ScxArguments, validate_scx_arguments

LEFT, RIGHT = 0, 1


class SCXArgumentError(AssertionError):
    pass


class TreeNode(DataRecord):
    __slots__ = ("key", "value")

    def __init__(self, key, value, left=None, right=None):
        DataRecord.__init__(self, [left, right])
        self.key = key
        self.value = value

    @property
    def left(self):
        return self.mut[LEFT]

    @property
    def right(self):
        return self.mut[RIGHT]

    def is_leaf(self) -> bool:
        return self.mut[LEFT] is None


def bfs_v(pairs):
    """Order (path, snapshot) pairs breadth first, left to right.

    path is a string of child indices from a common ancestor, so sorting by
    (length, path) gives the order the traversal constraint asks for.
    """
    return tuple(s for _, s in sorted(pairs, key=lambda p: (len(p[0]), p[0])))


class LeafTree:
    """Search, lookup, successor and quiescent statistics."""

    def __init__(self, reclaimer=None, debug: bool = False):
        self.rc = reclaimer
        self.debug = debug
        self.entry = self._make_entry()

    def _make_entry(self):
        raise NotImplementedError

    # Guards ------------------------------------------------------------

    def _enter(self):
        if self.rc is not None:
            self.rc.guard_enter()

    def _exit(self):
        if self.rc is not None:
            self.rc.guard_exit()

    def _retire(self, nodes) -> None:
        if self.rc is not None:
            for n in nodes:
                self.rc.retire(n)

    def _scx(self, V, R, fld, new, sigma) -> bool:
        if self.debug:
            bad = validate_scx_arguments(ScxArguments(V, R, fld, new), sigma)
            if bad:
                raise SCXArgumentError(f"SCX arguments violate {bad}")
        if scx(V, R, fld, new):
            self._retire(R)
            return True
        return False

    # Reads -------------------------------------------------------------

    def _search(self, key):
        ggp = gp = None
        p = self.entry
        l = p.mut[LEFT]
        kids = l.mut
        while kids[LEFT] is not None:
            ggp, gp, p = gp, p, l
            l = kids[LEFT] if key < l.key else kids[RIGHT]
            kids = l.mut
        return ggp, gp, p, l

    def get(self, key):
        """Value stored under key, or None."""
        self._enter()
        try:
            l = self._search(key)[3]
            return l.value if l.key == key else None
        finally:
            self._exit()

    def __contains__(self, key) -> bool:
        self._enter()
        try:
            return self._search(key)[3].key == key
        finally:
            self._exit()

    def successor(self, key):
        """Smallest (key', value) with key' > key, or None.

        Tracks the last node where the search went left, then takes the
        leftmost leaf of that node's right subtree.  A vlx over the path
        confirms the nodes were still linked together.
        """
        from .sync import llx, vlx
        self._enter()
        try:
            while True:
                snaps = []
                p = self.entry
                s = llx(p)
                if not s.ok:
                    continue
                snaps.append(s)
                l = s[LEFT]
                last_left = None
                failed = False
                while l.mut[LEFT] is not None:
                    s = llx(l)
                    if not s.ok:
                        failed = True
                        break
                    snaps.append(s)
                    if key < l.key:
                        last_left = len(snaps) - 1
                        l = s[LEFT]
                    else:
                        l = s[RIGHT]
                if failed:
                    continue
                if l.key > key:
                    # Only reached when the leaf itself is the successor.
                    if not vlx(snaps):
                        continue
                    return None if l.key == inf else (l.key, l.value)
                if last_left is None:
                    if not vlx(snaps):
                        continue
                    return None
                del snaps[last_left + 1:]
                n = snaps[last_left][RIGHT]
                while n is not None:
                    s = llx(n)
                    if not s.ok:
                        failed = True
                        break
                    snaps.append(s)
                    if n.mut[LEFT] is None:
                        break
                    n = s[LEFT]
                if failed or not vlx(snaps):
                    continue
                return None if n.key == inf else (n.key, n.value)
        finally:
            self._exit()

    # Quiescent helpers -------------------------------------------------

    def root(self):
        """The user-visible root, or None if the tree is empty."""
        top = self.entry.mut[LEFT]
        return None if top.mut[LEFT] is None else top.mut[LEFT]

    def leaves(self):
        out = []
        root = self.root()
        if root is None:
            return out
        stack = [root]
        while stack:
            n = stack.pop()
            if n.mut[LEFT] is None:
                out.append(n)
            else:
                stack.append(n.mut[RIGHT])
                stack.append(n.mut[LEFT])
        return out

    def items(self):
        return [(l.key, l.value) for l in self.leaves()]

    def keys(self):
        return [l.key for l in self.leaves()]

    def __len__(self) -> int:
        return len(self.leaves())

    def checksum(self) -> int:
        return sum(self.keys())

    def depths(self):
        """Edge depth of every leaf below the root."""
        root = self.root()
        if root is None:
            return []
        out = []
        stack = [(root, 0)]
        while stack:
            n, d = stack.pop()
            if n.mut[LEFT] is None:
                out.append(d)
            else:
                stack.append((n.mut[LEFT], d + 1))
                stack.append((n.mut[RIGHT], d + 1))
        return out

    def height(self) -> int:
        d = self.depths()
        return max(d) if d else 0

    def avg_leaf_depth(self) -> float:
        d = self.depths()
        return sum(d) / len(d) if d else 0.0

    def _check_shape(self) -> list[str]:
        """Ordering, sentinel and finalization checks common to all trees."""
        errs = []
        e = self.entry
        if e.key != inf:
            errs.append("entry key is not +inf")
        top = e.mut[LEFT]
        if top is None or top.key != inf:
            errs.append("entry.left is not a +inf node")
            return errs
        if e.mut[RIGHT] is None or e.mut[RIGHT].key != inf:
            errs.append("entry.right is not a +inf leaf")
        if top.mut[LEFT] is not None:
            if top.mut[RIGHT] is None or top.mut[RIGHT].key != inf \
                    or top.mut[RIGHT].mut[LEFT] is not None:
                errs.append("right child of the +inf node is not a +inf leaf")
        stack = [(top, -inf, inf)]
        seen = set()
        while stack:
            n, lo, hi = stack.pop()
            if id(n) in seen:
                errs.append("node reachable twice")
                continue
            seen.add(id(n))
            if n.is_finalized():
                errs.append(f"reachable node {n.key!r} is finalized")
            if (n.mut[LEFT] is None) != (n.mut[RIGHT] is None):
                errs.append(f"node {n.key!r} has exactly one child")
                continue
            if n.mut[LEFT] is None:
                if n is not top and not (lo <= n.key < hi or (n.key == inf and hi == inf)):
                    errs.append(f"leaf {n.key!r} outside ({lo!r}, {hi!r})")
                continue
            if n is not top and not (lo <= n.key <= hi):
                errs.append(f"routing key {n.key!r} outside [{lo!r}, {hi!r}]")
            stack.append((n.mut[LEFT], lo, n.key))
            stack.append((n.mut[RIGHT], n.key, hi))
        ks = self.keys()
        if any(a >= b for a, b in zip(ks, ks[1:])):
            errs.append("leaf keys not strictly increasing")
        return errs
