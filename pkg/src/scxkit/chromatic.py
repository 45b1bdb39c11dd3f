"""Chromatic tree: a relaxed red-black tree that rebalances lazily.

Every node carries an immutable weight.  Weight 0 is red, weight 1 black,
and weights above 1 are "overweight".  The tree stays a search tree and all
root-to-leaf weight sums stay equal; what the rebalancing steps repair are
violations: red-red edges and overweight nodes.  With no violations left
the tree is a red-black tree.

An update that may have created a violation walks its search path again
and fixes violations until too few remain.  With k_threshold=1 it fixes
every violation it meets; with larger values it waits until a path holds
at least that many, trading some height for fewer rebalancing steps.
"""

from __future__ import annotations

from math import inf

from . import sync as _sync
from .bst import LEFT, RIGHT, LeafTree, TreeNode
from .sync import DUMMY, llx


class ChromaticNode(TreeNode):
    __slots__ = ("w",)

    def __init__(self, key, value, w: int, left=None, right=None):
        # Flattened base-class init: node construction is on the hot path.
        self.mut = [left, right]
        self.info = DUMMY
        self.marked = False
        self.key = key
        self.value = value
        self.w = w
        if _sync._registry is not None:
            _sync._registry.append(self)

    def __repr__(self):
        kind = "Leaf" if self.mut[LEFT] is None else "Node"
        return f"{kind}({self.key!r}, w={self.w})"


def _node(key, w, side, near, far):
    """Internal node with child[side] = near and the other child = far."""
    if side == LEFT:
        return ChromaticNode(key, None, w, near, far)
    return ChromaticNode(key, None, w, far, near)


def _reweigh(n, snap, w):
    """Copy of n with weight w, children taken from n's snapshot."""
    return ChromaticNode(n.key, n.value, w, snap[LEFT], snap[RIGHT])


def _violation(p, l) -> int:
    v = l.w - 1 if l.w > 1 else 0
    if p is not None and p.w == 0 and l.w == 0:
        v += 1
    return v


class ChromaticTree(LeafTree):
    """Dictionary with insert, delete, get and successor.

    insert replaces the value of an existing key.  k_threshold is the
    number of violations a search path may hold before an update repairs
    them.
    """

    def __init__(self, reclaimer=None, k_threshold: int = 1, debug: bool = False):
        if k_threshold < 1:
            raise ValueError("k_threshold must be at least 1")
        self.k = k_threshold
        LeafTree.__init__(self, reclaimer, debug)

    def _make_entry(self):
        return ChromaticNode(inf, None, 1, ChromaticNode(inf, None, 1),
                             ChromaticNode(inf, None, 1))

    # Updates -----------------------------------------------------------

    def insert(self, key, value=None):
        """Insert or replace; returns the previous value or None."""
        self._enter()
        try:
            while True:
                _, _, p, l = self._search(key)
                res = self._try_insert(p, l, key, value)
                if res is not None:
                    old, violation = res
                    break
            if violation:
                self._cleanup(key)
            return old
        finally:
            self._exit()

    def _try_insert(self, p, l, key, value):
        sp = llx(p)
        if not sp.ok:
            return None
        if l is sp[LEFT]:
            side = LEFT
        elif l is sp[RIGHT]:
            side = RIGHT
        else:
            return None
        sl = llx(l)
        if not sl.ok:
            return None
        if l.key == key:
            new = ChromaticNode(key, value, l.w)
            if self._scx((sp, sl), (l,), (p, side), new, (sp, sl)):
                return l.value, False
            return None
        new_leaf = ChromaticNode(key, value, 1)
        # l sits in R, so the new subtree needs its own copy of it.
        l_copy = ChromaticNode(l.key, l.value, 1)
        if l.key == inf or p.key == inf:
            w = 1
        else:
            w = l.w - 1
        if key < l.key:
            new = ChromaticNode(l.key, None, w, new_leaf, l_copy)
        else:
            new = ChromaticNode(key, None, w, l_copy, new_leaf)
        if self._scx((sp, sl), (l,), (p, side), new, (sp, sl)):
            return None, w == 0 and p.w == 0 or l.w > 1
        return None

    def delete(self, key):
        """Remove key; returns its value, or None if absent."""
        self._enter()
        try:
            while True:
                _, gp, p, l = self._search(key)
                if l.key != key:
                    return None
                res = self._try_delete(gp, p, l)
                if res is not None:
                    old, violation = res
                    break
            if violation:
                self._cleanup(key)
            return old
        finally:
            self._exit()

    def _try_delete(self, gp, p, l):
        if gp is None:
            return None
        sgp = llx(gp)
        if not sgp.ok:
            return None
        if p is sgp[LEFT]:
            pside = LEFT
        elif p is sgp[RIGHT]:
            pside = RIGHT
        else:
            return None
        sp = llx(p)
        if not sp.ok:
            return None
        if l is sp[LEFT]:
            lside = LEFT
        elif l is sp[RIGHT]:
            lside = RIGHT
        else:
            return None
        s = sp[1 - lside]
        sl = llx(l)
        if not sl.ok:
            return None
        ss = llx(s)
        if not ss.ok:
            return None
        if p.key == inf or gp.key == inf:
            w = 1
        else:
            w = p.w + s.w
        new = _reweigh(s, ss, w)
        V = (sgp, sp, sl, ss) if lside == LEFT else (sgp, sp, ss, sl)
        if self._scx(V, (p, l, s), (gp, pside), new, (sgp, sp, sl, ss)):
            return l.value, w > 1
        return None

    # Rebalancing -------------------------------------------------------

    def _cleanup(self, key) -> None:
        k = self.k
        while True:
            ggp = gp = None
            p = self.entry
            l = p.mut[LEFT]
            found = None
            count = 0
            while True:
                lw = l.w
                if lw > 1 or (lw == 0 and p.w == 0):
                    if found is None:
                        found = (ggp, gp, p, l)
                    count += _violation(p, l)
                    if count >= k:
                        break
                kids = l.mut
                if kids[LEFT] is None:
                    break
                ggp, gp, p = gp, p, l
                l = kids[LEFT] if key < l.key else kids[RIGHT]
            if count < k:
                return
            self._try_rebalance(*found)

    def _try_rebalance(self, ggp, gp, p, l) -> None:
        if ggp is None or gp is None:
            return
        sr = llx(ggp)
        if not sr.ok or (gp is not sr[LEFT] and gp is not sr[RIGHT]):
            return
        sx = llx(gp)
        if not sx.ok or (p is not sx[LEFT] and p is not sx[RIGHT]):
            return
        sxx = llx(p)
        if not sxx.ok or (l is not sxx[LEFT] and l is not sxx[RIGHT]):
            return
        sigma = [sr, sx, sxx]
        if l.w > 1:
            sl = llx(l)
            if not sl.ok:
                return
            sigma.append(sl)
            self._overweight(sr, sx, sxx, sl, sigma)
        else:
            self._red_red(sr, sx, sxx, l, sigma)

    def _red_red(self, sr, sx, sxx, l, sigma) -> None:
        """Fix the red-red edge between xx = sxx.record and its child l."""
        x, xx = sx.record, sxx.record
        pside = LEFT if xx is sx[LEFT] else RIGHT
        other = sx[1 - pside]
        if other.w == 0:
            so = llx(other)
            if not so.ok:
                return
            sigma.append(so)
            self._blk(sr, sx, sxx, so, pside, sigma)
        elif l is sxx[pside]:
            self._rb1(sr, sx, sxx, pside, sigma)
        else:
            sl = llx(l)
            if not sl.ok:
                return
            sigma.append(sl)
            self._rb2(sr, sx, sxx, sl, pside, sigma)

    def _top_weight(self, r, w):
        return 1 if r.key == inf else w

    def _blk(self, sr, sx, sxx, so, pside, sigma) -> None:
        r, x, xx, o = sr.record, sx.record, sxx.record, so.record
        if x.w == 0 and r.key != inf:
            return
        a = _reweigh(xx, sxx, 1)
        b = _reweigh(o, so, 1)
        new = _node(x.key, self._top_weight(r, x.w - 1), pside, a, b)
        fld = (r, LEFT if x is sr[LEFT] else RIGHT)
        V = (sr, sx, sxx, so) if pside == LEFT else (sr, sx, so, sxx)
        self._scx(V, (x, xx, o), fld, new, sigma)

    def _rb1(self, sr, sx, sxx, pside, sigma) -> None:
        r, x, xx = sr.record, sx.record, sxx.record
        o = 1 - pside
        inner = _node(x.key, 0, pside, sxx[o], sx[o])
        new = _node(xx.key, x.w, pside, sxx[pside], inner)
        fld = (r, LEFT if x is sr[LEFT] else RIGHT)
        self._scx((sr, sx, sxx), (x, xx), fld, new, sigma)

    def _rb2(self, sr, sx, sxx, sl, pside, sigma) -> None:
        r, x, xx, l = sr.record, sx.record, sxx.record, sl.record
        if sl[LEFT] is None:
            return
        o = 1 - pside
        near = _node(xx.key, 0, pside, sxx[pside], sl[pside])
        far = _node(x.key, 0, pside, sl[o], sx[o])
        new = _node(l.key, x.w, pside, near, far)
        fld = (r, LEFT if x is sr[LEFT] else RIGHT)
        self._scx((sr, sx, sxx, sl), (x, xx, l), fld, new, sigma)

    def _overweight(self, sr, sx, sxx, sl, sigma) -> None:
        """l = sl.record is overweight; its parent is xx, whose parent is x.

        sib is l's sibling; near and far are sib's children on l's side and
        on the other side.
        """
        xx, l = sxx.record, sl.record
        side = LEFT if l is sxx[LEFT] else RIGHT
        o = 1 - side
        sib = sxx[o]
        if sib.w == 0:
            if xx.w == 0:
                self._red_red(sr, sx, sxx, sib, sigma)
                return
            ssib = llx(sib)
            if not ssib.ok:
                return
            sigma.append(ssib)
            near = ssib[side]
            if near is None:
                return
            snear = llx(near)
            if not snear.ok:
                return
            sigma.append(snear)
            if near.w > 1:
                self._w12(sx, sxx, sl, ssib, snear, side, near.w - 1, sigma)
            elif near.w == 0:
                self._rb2(sx, sxx, ssib, snear, o, sigma)
            else:
                far = snear[o]
                if far is None:
                    return
                if far.w == 0:
                    sfar = llx(far)
                    if not sfar.ok:
                        return
                    sigma.append(sfar)
                    self._w4(sx, sxx, sl, ssib, snear, sfar, side, sigma)
                else:
                    nn = snear[side]
                    if nn.w == 0:
                        snn = llx(nn)
                        if not snn.ok:
                            return
                        sigma.append(snn)
                        self._w3(sx, sxx, sl, ssib, snear, snn, side, sigma)
                    else:
                        self._w12(sx, sxx, sl, ssib, snear, side, 0, sigma)
        elif sib.w == 1:
            ssib = llx(sib)
            if not ssib.ok:
                return
            sigma.append(ssib)
            far = ssib[o]
            if far is None:
                return
            if far.w == 0:
                sfar = llx(far)
                if not sfar.ok:
                    return
                sigma.append(sfar)
                self._w5(sx, sxx, sl, ssib, sfar, side, sigma)
            elif ssib[side].w == 0:
                snear = llx(ssib[side])
                if not snear.ok:
                    return
                sigma.append(snear)
                self._w6(sx, sxx, sl, ssib, snear, side, sigma)
            else:
                self._push(sx, sxx, sl, ssib, side, 0, sigma)
        else:
            ssib = llx(sib)
            if not ssib.ok:
                return
            sigma.append(ssib)
            self._push(sx, sxx, sl, ssib, side, sib.w - 1, sigma)

    # The W steps share one frame: x is the parent of xx, xx the parent of
    # the overweight l and its red or black sibling sib.  Each replaces xx.

    @staticmethod
    def _fld(sx, n):
        return (sx.record, LEFT if n is sx[LEFT] else RIGHT)

    @staticmethod
    def _frame_v(sx, sxx, sl, ssib, side, *deeper):
        # Nodes below sib sit one per level, so only the sibling pair needs
        # ordering to keep V breadth first.
        if side == LEFT:
            return (sx, sxx, sl, ssib) + deeper
        return (sx, sxx, ssib, sl) + deeper

    def _w12(self, sx, sxx, sl, ssib, snear, side, near_w, sigma) -> None:
        # W1 (near overweight, loses one) and W2 (near black, turns red).
        xx, l, sib, near = sxx.record, sl.record, ssib.record, snear.record
        o = 1 - side
        a = _node(xx.key, 1, side, _reweigh(l, sl, l.w - 1), _reweigh(near, snear, near_w))
        new = _node(sib.key, xx.w, side, a, ssib[o])
        V = self._frame_v(sx, sxx, sl, ssib, side, snear)
        self._scx(V, (xx, l, sib, near), self._fld(sx, xx), new, sigma)

    def _w3(self, sx, sxx, sl, ssib, snear, snn, side, sigma) -> None:
        xx, l, sib, near, nn = sxx.record, sl.record, ssib.record, snear.record, snn.record
        o = 1 - side
        a = _node(xx.key, 1, side, _reweigh(l, sl, l.w - 1), snn[side])
        b = _node(near.key, 1, side, snn[o], snear[o])
        c = _node(nn.key, 0, side, a, b)
        new = _node(sib.key, xx.w, side, c, ssib[o])
        V = self._frame_v(sx, sxx, sl, ssib, side, snear, snn)
        self._scx(V, (xx, l, sib, near, nn), self._fld(sx, xx), new, sigma)

    def _w4(self, sx, sxx, sl, ssib, snear, sfar, side, sigma) -> None:
        xx, l, sib, near, far = sxx.record, sl.record, ssib.record, snear.record, sfar.record
        o = 1 - side
        a = _node(xx.key, 1, side, _reweigh(l, sl, l.w - 1), snear[side])
        c = _node(near.key, 0, side, a, _reweigh(far, sfar, 1))
        new = _node(sib.key, xx.w, side, c, ssib[o])
        V = self._frame_v(sx, sxx, sl, ssib, side, snear, sfar)
        self._scx(V, (xx, l, sib, near, far), self._fld(sx, xx), new, sigma)

    def _w5(self, sx, sxx, sl, ssib, sfar, side, sigma) -> None:
        xx, l, sib, far = sxx.record, sl.record, ssib.record, sfar.record
        o = 1 - side
        a = _node(xx.key, 1, side, _reweigh(l, sl, l.w - 1), ssib[side])
        new = _node(sib.key, xx.w, side, a, _reweigh(far, sfar, 1))
        V = self._frame_v(sx, sxx, sl, ssib, side, sfar)
        self._scx(V, (xx, l, sib, far), self._fld(sx, xx), new, sigma)

    def _w6(self, sx, sxx, sl, ssib, snear, side, sigma) -> None:
        xx, l, sib, near = sxx.record, sl.record, ssib.record, snear.record
        o = 1 - side
        a = _node(xx.key, 1, side, _reweigh(l, sl, l.w - 1), snear[side])
        b = _node(sib.key, 1, side, snear[o], ssib[o])
        new = _node(near.key, xx.w, side, a, b)
        V = self._frame_v(sx, sxx, sl, ssib, side, snear)
        self._scx(V, (xx, l, sib, near), self._fld(sx, xx), new, sigma)

    def _push(self, sx, sxx, sl, ssib, side, sib_w, sigma) -> None:
        # PUSH (sib black, turns red) and W7 (sib overweight, loses one).
        x, xx, l, sib = sx.record, sxx.record, sl.record, ssib.record
        w = 1 if x.key == inf else xx.w + 1
        new = _node(xx.key, w, side, _reweigh(l, sl, l.w - 1), _reweigh(sib, ssib, sib_w))
        V = self._frame_v(sx, sxx, sl, ssib, side)
        self._scx(V, (xx, l, sib), self._fld(sx, xx), new, sigma)

    # Quiescent checks --------------------------------------------------

    def violations(self) -> int:
        """Sum over nodes of (weight - 1) for overweight ones plus red-red edges."""
        total = 0
        stack = [(None, self.entry.mut[LEFT])]
        while stack:
            p, n = stack.pop()
            total += _violation(p, n)
            if n.mut[LEFT] is not None:
                stack.append((n, n.mut[LEFT]))
                stack.append((n, n.mut[RIGHT]))
        return total

    def validate(self, strict: bool = False) -> list[str]:
        """Invariant violations found at quiescence.

        Always checks ordering, equal weighted path sums, positive leaf
        weights and sentinel layout.  strict also requires a red-black tree:
        no violations at all.
        """
        errs = self._check_shape()
        top = self.entry.mut[LEFT]
        if self.entry.w != 1 or top.w != 1:
            errs.append("sentinel weight is not 1")
        root = self.root()
        if root is not None:
            if root.w != 1:
                errs.append(f"root weight {root.w} != 1")
            sums = set()
            stack = [(root, 0)]
            while stack:
                n, s = stack.pop()
                if n.w < 0:
                    errs.append(f"negative weight at {n.key!r}")
                s += n.w
                if n.mut[LEFT] is None:
                    if n.w < 1:
                        errs.append(f"leaf {n.key!r} has weight {n.w}")
                    sums.add(s)
                else:
                    stack.append((n.mut[LEFT], s))
                    stack.append((n.mut[RIGHT], s))
            if len(sums) > 1:
                errs.append(f"unequal path weight sums {sorted(sums)}")
        if strict and self.violations():
            errs.append(f"{self.violations()} violations remain")
        return errs
