"""Relaxed (a,b)-tree: a leaf-oriented B-tree variant with lazy rebalancing.

Leaves hold up to b sorted key-value pairs.  An internal node with d child
pointers holds d-1 routing keys; a search advances past key i while
key >= keys[i].  Two kinds of violation are tolerated between updates:

  tag     an internal node created by a split that has not been merged
          into its parent yet.  Tagged nodes always have two children and
          do not count as a level, so all leaves stay at equal relaxed level.
  degree  a non-root node with fewer than a children (or keys, for a
          leaf), or an internal root with a single child.

The sentinel entry has exactly one child, the root, and no keys.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right

from . import sync as _sync
from .sync import DUMMY, llx, scx
from .template import ScxArguments, validate_scx_arguments
from .bst import SCXArgumentError


class AbNode(_sync.DataRecord):
    __slots__ = ("keys", "values", "tag", "leaf")

    def __init__(self, keys, values=None, children=None, tag: bool = False):
        # Leaves carry values and no children; internal nodes the reverse.
        self.mut = list(children) if children is not None else []
        self.info = DUMMY
        self.marked = False
        self.keys = tuple(keys)
        self.leaf = children is None
        self.values = tuple(values) if values is not None else None
        self.tag = tag
        if _sync._registry is not None:
            _sync._registry.append(self)

    @property
    def d(self) -> int:
        """Degree: children for an internal node, pairs for a leaf."""
        return len(self.keys) if self.leaf else len(self.mut)

    def __repr__(self):
        if self.leaf:
            return f"AbLeaf({list(self.keys)!r})"
        t = " tagged" if self.tag else ""
        return f"AbNode({list(self.keys)!r}{t})"


def _leaf(keys, values) -> AbNode:
    return AbNode(keys, values)


def _internal(keys, children, tag: bool = False) -> AbNode:
    return AbNode(keys, None, children, tag)


def _split(m: int):
    """Sizes of the two halves of m items, larger half on the left."""
    return (m + 1) // 2, m // 2


class ABTree:
    """Dictionary on a relaxed (a,b)-tree; needs b >= 2a - 1 and a >= 2."""

    def __init__(self, a: int = 6, b: int = 16, reclaimer=None, debug: bool = False):
        if a < 2 or b < 2 * a - 1:
            raise ValueError("need a >= 2 and b >= 2a - 1")
        self.a = a
        self.b = b
        self.rc = reclaimer
        self.debug = debug
        self.entry = _internal((), [_leaf((), ())])

    # Plumbing ----------------------------------------------------------

    def _enter(self):
        if self.rc is not None:
            self.rc.guard_enter()

    def _exit(self):
        if self.rc is not None:
            self.rc.guard_exit()

    def _scx(self, V, R, fld, new, sigma) -> bool:
        if self.debug:
            bad = validate_scx_arguments(ScxArguments(V, R, fld, new), sigma)
            if bad:
                raise SCXArgumentError(f"SCX arguments violate {bad}")
        if scx(V, R, fld, new):
            if self.rc is not None:
                for n in R:
                    self.rc.retire(n)
            return True
        return False

    # Reads -------------------------------------------------------------

    def _search(self, key):
        gp = None
        p = self.entry
        l = p.mut[0]
        while not l.leaf:
            gp, p = p, l
            l = l.mut[bisect_right(l.keys, key)]
        return gp, p, l

    def get(self, key):
        self._enter()
        try:
            l = self._search(key)[2]
            i = bisect_left(l.keys, key)
            if i < len(l.keys) and l.keys[i] == key:
                return l.values[i]
            return None
        finally:
            self._exit()

    def __contains__(self, key) -> bool:
        self._enter()
        try:
            l = self._search(key)[2]
            i = bisect_left(l.keys, key)
            return i < len(l.keys) and l.keys[i] == key
        finally:
            self._exit()

    # Updates -----------------------------------------------------------

    def insert(self, key, value=None):
        """Insert or replace; returns the previous value or None."""
        self._enter()
        try:
            while True:
                res = self._try_insert(key, value)
                if res is not None:
                    break
            old, violation = res
            if violation:
                self._cleanup(key)
            return old
        finally:
            self._exit()

    def _locate(self, p, l):
        sp = llx(p)
        if not sp.ok:
            return None
        for i, c in enumerate(sp.values):
            if c is l:
                break
        else:
            return None
        sl = llx(l)
        if not sl.ok:
            return None
        return sp, sl, i

    def _try_insert(self, key, value):
        _, p, l = self._search(key)
        got = self._locate(p, l)
        if got is None:
            return None
        sp, sl, i = got
        keys, vals = l.keys, l.values
        j = bisect_left(keys, key)
        if j < len(keys) and keys[j] == key:
            new = _leaf(keys, vals[:j] + (value,) + vals[j + 1:])
            old, violation = vals[j], False
        else:
            nk = keys[:j] + (key,) + keys[j:]
            nv = vals[:j] + (value,) + vals[j:]
            old = None
            if len(keys) < self.b:
                new, violation = _leaf(nk, nv), False
            else:
                h, _ = _split(len(nk))
                left = _leaf(nk[:h], nv[:h])
                right = _leaf(nk[h:], nv[h:])
                new, violation = _internal((nk[h],), [left, right], tag=True), True
        if self._scx((sp, sl), (l,), (p, i), new, (sp, sl)):
            return old, violation
        return None

    def delete(self, key):
        """Remove key; returns its value, or None if absent."""
        self._enter()
        try:
            while True:
                res = self._try_delete(key)
                if res is not None:
                    break
            old, violation = res
            if violation:
                self._cleanup(key)
            return old
        finally:
            self._exit()

    def _try_delete(self, key):
        _, p, l = self._search(key)
        got = self._locate(p, l)
        if got is None:
            return None
        sp, sl, i = got
        keys, vals = l.keys, l.values
        j = bisect_left(keys, key)
        if j == len(keys) or keys[j] != key:
            return None, False
        new = _leaf(keys[:j] + keys[j + 1:], vals[:j] + vals[j + 1:])
        if self._scx((sp, sl), (l,), (p, i), new, (sp, sl)):
            return vals[j], len(keys) == self.a
        return None

    # Rebalancing -------------------------------------------------------

    def _cleanup(self, key) -> None:
        a, b = self.a, self.b
        while True:
            p = self.entry
            l = p.mut[0]
            if l.tag:
                self._root_untag(l)
                continue
            if not l.leaf and len(l.mut) == 1:
                self._root_absorb(l)
                continue
            gp = None
            ix_p, ix_l = 0, 0
            found = False
            while not l.leaf:
                ix_p = ix_l
                ix_l = bisect_right(l.keys, key)
                gp, p = p, l
                l = l.mut[ix_l]
                if l.tag or l.d < a:
                    found = True
                    break
            if not found:
                return
            if l.tag:
                if p.d + l.d <= b + 1:
                    self._absorb_child(gp, ix_p, p, ix_l, l)
                else:
                    self._propagate_tag(gp, ix_p, p, ix_l, l)
                continue
            ix_s = ix_l - 1 if ix_l > 0 else ix_l + 1
            s = p.mut[ix_s]
            if s.tag:
                if p.d + s.d <= b + 1:
                    self._absorb_child(gp, ix_p, p, ix_s, s)
                else:
                    self._propagate_tag(gp, ix_p, p, ix_s, s)
            elif l.d + s.d < 2 * a:
                self._absorb_sibling(gp, ix_p, p, ix_l, l, ix_s, s)
            else:
                self._distribute(gp, ix_p, p, ix_l, l, ix_s, s)

    def _root_untag(self, root) -> None:
        se = llx(self.entry)
        if not se.ok or se[0] is not root:
            return
        sr = llx(root)
        if not sr.ok:
            return
        new = _internal(root.keys, sr.values)
        self._scx((se, sr), (root,), (self.entry, 0), new, (se, sr))

    def _root_absorb(self, root) -> None:
        se = llx(self.entry)
        if not se.ok or se[0] is not root:
            return
        sr = llx(root)
        if not sr.ok or len(sr.values) != 1:
            return
        c = sr[0]
        sc = llx(c)
        if not sc.ok:
            return
        if c.leaf:
            new = _leaf(c.keys, c.values)
        else:
            new = _internal(c.keys, sc.values)
        self._scx((se, sr, sc), (root, c), (self.entry, 0), new, (se, sr, sc))

    def _top(self, gp, ix_p, p, kids):
        """LLX gp and p, checking gp -> p and p -> each (index, node) in kids."""
        sgp = llx(gp)
        if not sgp.ok or ix_p >= len(sgp.values) or sgp[ix_p] is not p:
            return None
        sp = llx(p)
        if not sp.ok:
            return None
        for i, n in kids:
            if i >= len(sp.values) or sp[i] is not n:
                return None
        return sgp, sp

    def _absorb_child(self, gp, ix_p, p, ix_c, c) -> None:
        top = self._top(gp, ix_p, p, ((ix_c, c),))
        if top is None:
            return
        sgp, sp = top
        sc = llx(c)
        if not sc.ok:
            return
        ptrs = list(sp.values)
        keys = p.keys[:ix_c] + c.keys + p.keys[ix_c:]
        kids = ptrs[:ix_c] + list(sc.values) + ptrs[ix_c + 1:]
        new = _internal(keys, kids, p.tag)
        self._scx((sgp, sp, sc), (p, c), (gp, ix_p), new, (sgp, sp, sc))

    def _propagate_tag(self, gp, ix_p, p, ix_c, c) -> None:
        top = self._top(gp, ix_p, p, ((ix_c, c),))
        if top is None:
            return
        sgp, sp = top
        sc = llx(c)
        if not sc.ok:
            return
        ptrs = list(sp.values)
        keys = p.keys[:ix_c] + c.keys + p.keys[ix_c:]
        kids = ptrs[:ix_c] + list(sc.values) + ptrs[ix_c + 1:]
        h, _ = _split(len(kids))
        left = _internal(keys[:h - 1], kids[:h])
        right = _internal(keys[h:], kids[h:])
        # Splitting the root's only child needs no tag: the entry's single
        # pointer cannot absorb it anyway, and root_untag would just undo it.
        new = _internal((keys[h - 1],), [left, right], tag=True)
        self._scx((sgp, sp, sc), (p, c), (gp, ix_p), new, (sgp, sp, sc))

    def _pair(self, gp, ix_p, p, ix_l, l, ix_s, s):
        top = self._top(gp, ix_p, p, ((ix_l, l), (ix_s, s)))
        if top is None:
            return None
        sgp, sp = top
        if ix_s < ix_l:
            left, right, ix_left = s, l, ix_s
        else:
            left, right, ix_left = l, s, ix_l
        sleft = llx(left)
        if not sleft.ok:
            return None
        sright = llx(right)
        if not sright.ok:
            return None
        return sgp, sp, sleft, sright, ix_left

    def _absorb_sibling(self, gp, ix_p, p, ix_l, l, ix_s, s) -> None:
        got = self._pair(gp, ix_p, p, ix_l, l, ix_s, s)
        if got is None:
            return
        sgp, sp, sleft, sright, ix = got
        left, right = sleft.record, sright.record
        if left.leaf:
            merged = _leaf(left.keys + right.keys, left.values + right.values)
        else:
            merged = _internal(left.keys + (p.keys[ix],) + right.keys,
                               list(sleft.values) + list(sright.values))
        ptrs = list(sp.values)
        kids = ptrs[:ix] + [merged] + ptrs[ix + 2:]
        keys = p.keys[:ix] + p.keys[ix + 1:]
        new = _internal(keys, kids, p.tag)
        V = (sgp, sp, sleft, sright)
        self._scx(V, (p, left, right), (gp, ix_p), new, V)

    def _distribute(self, gp, ix_p, p, ix_l, l, ix_s, s) -> None:
        got = self._pair(gp, ix_p, p, ix_l, l, ix_s, s)
        if got is None:
            return
        sgp, sp, sleft, sright, ix = got
        left, right = sleft.record, sright.record
        if left.leaf:
            keys = left.keys + right.keys
            vals = left.values + right.values
            h, _ = _split(len(keys))
            nl = _leaf(keys[:h], vals[:h])
            nr = _leaf(keys[h:], vals[h:])
            sep = keys[h]
        else:
            keys = left.keys + (p.keys[ix],) + right.keys
            kids = list(sleft.values) + list(sright.values)
            h, _ = _split(len(kids))
            nl = _internal(keys[:h - 1], kids[:h])
            nr = _internal(keys[h:], kids[h:])
            sep = keys[h - 1]
        ptrs = list(sp.values)
        kids_p = ptrs[:ix] + [nl, nr] + ptrs[ix + 2:]
        keys_p = p.keys[:ix] + (sep,) + p.keys[ix + 1:]
        new = _internal(keys_p, kids_p, p.tag)
        V = (sgp, sp, sleft, sright)
        self._scx(V, (p, left, right), (gp, ix_p), new, V)

    # Quiescent helpers -------------------------------------------------

    def root(self):
        return self.entry.mut[0]

    def _walk(self):
        """(node, depth, relaxed level) for every node below the entry."""
        out = []
        stack = [(self.root(), 0, 0)]
        while stack:
            n, dep, lev = stack.pop()
            out.append((n, dep, lev))
            if not n.leaf:
                nl = lev if n.tag else lev + 1
                for c in reversed(n.mut):
                    stack.append((c, dep + 1, nl))
        return out

    def leaves(self):
        return [n for n, _, _ in self._walk() if n.leaf]

    def items(self):
        return [kv for l in self.leaves() for kv in zip(l.keys, l.values)]

    def keys(self):
        return [k for l in self.leaves() for k in l.keys]

    def __len__(self) -> int:
        return sum(len(l.keys) for l in self.leaves())

    def checksum(self) -> int:
        return sum(self.keys())

    def height(self) -> int:
        return max(dep for n, dep, _ in self._walk() if n.leaf)

    def avg_leaf_depth(self) -> float:
        ds = [dep for n, dep, _ in self._walk() if n.leaf]
        return sum(ds) / len(ds)

    def violations(self) -> int:
        a = self.a
        root = self.root()
        total = 0
        for n, _, _ in self._walk():
            if n.tag:
                total += 1
            elif n is root:
                if not n.leaf and len(n.mut) == 1:
                    total += 1
            elif n.d < a:
                total += 1
        return total

    def validate(self, strict: bool = False) -> list[str]:
        """Invariant violations found at quiescence.

        Always checks search order, node shape and equal relaxed level of
        all leaves.  strict also requires a plain (a,b)-tree: no tags, every
        degree within [a, b] (the root may be smaller) and equal leaf depth.
        """
        errs = []
        e = self.entry
        if e.leaf or len(e.mut) != 1 or e.keys:
            errs.append("entry sentinel must have one child and no keys")
            return errs
        root = self.root()
        levels, depths = set(), set()
        stack = [(root, None, None)]
        seen = set()
        while stack:
            n, lo, hi = stack.pop()
            if id(n) in seen:
                errs.append("node reachable twice")
                continue
            seen.add(id(n))
            if n.is_finalized():
                errs.append(f"reachable node {n!r} is finalized")
            ks = n.keys
            if any(x >= y for x, y in zip(ks, ks[1:])):
                errs.append(f"keys not increasing in {n!r}")
            if ks and ((lo is not None and ks[0] < lo) or (hi is not None and ks[-1] >= hi)):
                errs.append(f"keys of {n!r} outside [{lo!r}, {hi!r})")
            if n.leaf:
                if n.tag:
                    errs.append(f"tagged leaf {n!r}")
                if len(n.values) != len(ks) or n.mut:
                    errs.append(f"malformed leaf {n!r}")
                if len(ks) > self.b:
                    errs.append(f"leaf {n!r} over capacity")
                continue
            if len(n.mut) != len(ks) + 1:
                errs.append(f"internal {n!r} has {len(n.mut)} children for {len(ks)} keys")
                continue
            if n.tag and len(n.mut) != 2:
                errs.append(f"tagged node {n!r} with {len(n.mut)} children")
            if len(n.mut) > self.b:
                errs.append(f"node {n!r} over capacity")
            bounds = [lo] + list(ks) + [hi]
            for i, c in enumerate(n.mut):
                stack.append((c, bounds[i], bounds[i + 1]))
        for n, dep, lev in self._walk():
            if n.leaf:
                levels.add(lev)
                depths.add(dep)
        if len(levels) > 1:
            errs.append(f"leaves at relaxed levels {sorted(levels)}")
        if strict:
            if self.violations():
                errs.append(f"{self.violations()} violations remain")
            if len(depths) > 1:
                errs.append(f"leaves at depths {sorted(depths)}")
        return errs
