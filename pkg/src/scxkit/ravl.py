"""Relaxed AVL tree.

Each node has an immutable tag and an immutable relaxed balance factor.
The relaxed height of a leaf is its tag; an internal node's is one plus
its tag plus the larger relaxed height of its children.  rbf is the left
child's relaxed height minus the right child's and always stays in
{-1, 0, 1}.  A negative tag is one violation and a positive tag t counts t
violations; a tree with every tag zero is an AVL tree.

Rebalancing steps only read tags and rbf values of the nodes they replace,
so the relaxed heights they need are computed relative to the topmost
node.  Each new internal node gets tag 0 except the topmost, whose tag is
chosen so its relaxed height is unchanged (or 0 when it is the root).
"""

from __future__ import annotations

from math import inf

from . import sync as _sync
from .bst import LEFT, RIGHT, LeafTree, TreeNode
from .sync import DUMMY, llx

# Step names, used by the catalog test and for step counters.
R3, R4 = "R3", "R4"
R3_5, R3_6, R3_7, R3_8 = "R3:5", "R3:6", "R3:7", "R3:8"
R4_9, R4_10, R4_11, R4_12, R4_13 = "R4:9", "R4:10", "R4:11", "R4:12", "R4:13"
STEPS = (R3, R3_5, R3_6, R3_7, R3_8, R4, R4_9, R4_10, R4_11, R4_12, R4_13)


class RavlNode(TreeNode):
    __slots__ = ("tag", "rbf")

    def __init__(self, key, value, tag: int, rbf: int = 0, left=None, right=None):
        self.mut = [left, right]
        self.info = DUMMY
        self.marked = False
        self.key = key
        self.value = value
        self.tag = tag
        self.rbf = rbf
        if _sync._registry is not None:
            _sync._registry.append(self)

    def __repr__(self):
        if self.mut[LEFT] is None:
            return f"Leaf({self.key!r}, t={self.tag})"
        return f"Node({self.key!r}, t={self.tag}, b={self.rbf})"


def violation_weight(tag: int) -> int:
    return tag if tag > 0 else (1 if tag < 0 else 0)


def kid_heights(n, h):
    """Relaxed heights of n's (left, right) children given rh(n) = h."""
    m = h - 1 - n.tag
    b = n.rbf
    return (m - 1 if b < 0 else m), (m - 1 if b > 0 else m)


def _toward(rbf: int, side: int) -> int:
    """rbf as seen from side: positive when the side child is taller."""
    return rbf if side == LEFT else -rbf


class _Builder:
    """Assembles a replacement subtree while tracking relaxed heights."""

    __slots__ = ()

    @staticmethod
    def keep(node, h):
        return node, h

    @staticmethod
    def retag(node, snap, delta, h):
        return RavlNode(node.key, node.value, node.tag + delta, node.rbf,
                        snap[LEFT], snap[RIGHT]), h + delta

    @staticmethod
    def join(key, side, near, far, tag=0):
        if side == LEFT:
            (ln, lh), (rn, rh) = near, far
        else:
            (ln, lh), (rn, rh) = far, near
        return RavlNode(key, None, tag, lh - rh, ln, rn), max(lh, rh) + 1 + tag

    @staticmethod
    def top(key, side, near, far, h_target, is_root):
        hs = max(near[1], far[1])
        tag = 0 if is_root else h_target - 1 - hs
        return _Builder.join(key, side, near, far, tag)


B = _Builder


class RavlTree(LeafTree):
    """Dictionary with insert, delete, get and successor on a RAVL tree."""

    def __init__(self, reclaimer=None, k_threshold: int = 1, debug: bool = False):
        if k_threshold < 1:
            raise ValueError("k_threshold must be at least 1")
        self.k = k_threshold
        self.step_counts = dict.fromkeys(STEPS, 0)
        LeafTree.__init__(self, reclaimer, debug)

    def _make_entry(self):
        return RavlNode(inf, None, 0, 0, RavlNode(inf, None, 0), RavlNode(inf, None, 0))

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
            new = RavlNode(key, value, l.tag)
            if self._scx((sp, sl), (l,), (p, side), new, (sp, sl)):
                return l.value, False
            return None
        tag = 0 if p.key == inf else l.tag - 1
        new_leaf = RavlNode(key, value, 0)
        l_copy = RavlNode(l.key, l.value, 0)
        if key < l.key:
            new = RavlNode(l.key, None, tag, 0, new_leaf, l_copy)
        else:
            new = RavlNode(key, None, tag, 0, l_copy, new_leaf)
        if self._scx((sp, sl), (l,), (p, side), new, (sp, sl)):
            return None, tag < 0
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
            tag = 0
        else:
            # The sibling takes over p's relaxed height.  It gains one extra
            # level when l was the taller child.
            taller = 1 if _toward(p.rbf, lside) > 0 else 0
            tag = s.tag + 1 + p.tag + taller
        new = RavlNode(s.key, s.value, tag, s.rbf, ss[LEFT], ss[RIGHT])
        V = (sgp, sp, sl, ss) if lside == LEFT else (sgp, sp, ss, sl)
        if self._scx(V, (p, l, s), (gp, pside), new, (sgp, sp, sl, ss)):
            return l.value, tag != 0
        return None

    # Rebalancing -------------------------------------------------------

    def _cleanup(self, key) -> None:
        k = self.k
        while True:
            gp = None
            p = self.entry
            l = p.mut[LEFT]
            found = None
            count = 0
            while True:
                t = l.tag
                if t:
                    if found is None:
                        found = (gp, p, l)
                    count += violation_weight(t)
                    if count >= k:
                        break
                kids = l.mut
                if kids[LEFT] is None:
                    break
                gp, p = p, l
                l = kids[LEFT] if key < l.key else kids[RIGHT]
            if count < k:
                return
            self._try_rebalance(*found)

    def _try_rebalance(self, p, u, v) -> None:
        """Fix the violation at v, a child of u, whose parent is p."""
        if p is None:
            return
        sp = llx(p)
        if not sp.ok or (u is not sp[LEFT] and u is not sp[RIGHT]):
            return
        su = llx(u)
        if not su.ok:
            return
        if v is su[LEFT]:
            side = LEFT
        elif v is su[RIGHT]:
            side = RIGHT
        else:
            return
        sv = llx(v)
        if not sv.ok:
            return
        sigma = [sp, su, sv]
        if v.tag < 0:
            self._negative(sp, su, sv, side, sigma)
        elif v.tag > 0:
            self._positive(sp, su, sv, side, sigma)

    def choose_step(self, u, v, side):
        """Name of the step the decision tree picks for a violation at v.

        Pure function of immutable fields; used by tests.  Returns
        ("neg-sibling", step) when a positive violation defers to the
        negative one at its sibling.
        """
        o = 1 - side
        if v.tag < 0:
            return self._choose_negative(u, v, side)
        if _toward(u.rbf, side) >= 0:
            return R4
        w = u.mut[o]
        if w.tag > 0:
            return R4_9
        if w.tag < 0:
            return ("neg-sibling", self._choose_negative(u, w, o))
        if _toward(w.rbf, o) >= 0:
            return R4_10
        x = w.mut[side]
        if x.tag > 0:
            return R4_11
        return R4_12 if x.tag == 0 else R4_13

    @staticmethod
    def _choose_negative(u, v, side):
        if _toward(u.rbf, side) <= 0:
            return R3
        if _toward(v.rbf, side) >= 0:
            return R3_5
        w = v.mut[1 - side]
        if w.tag > 0:
            return R3_6
        return R3_7 if w.tag == 0 else R3_8

    def _negative(self, sp, su, sv, side, sigma) -> None:
        u, v = su.record, sv.record
        o = 1 - side
        is_root = sp.record.key == inf
        hu = 0
        hk = kid_heights(u, hu)
        hv, hw = hk[side], hk[o]
        if _toward(u.rbf, side) <= 0:
            near = B.retag(v, sv, 1, hv)
            new = B.top(u.key, side, near, (su[o], hw), hu, is_root)[0]
            self._commit(R3, sp, (su, sv), (u, v), new, sigma)
            return
        hvk = kid_heights(v, hv)
        if _toward(v.rbf, side) >= 0:
            inner = B.join(u.key, side, (sv[o], hvk[o]), (su[o], hw))
            new = B.top(v.key, side, (sv[side], hvk[side]), inner, hu, is_root)[0]
            self._commit(R3_5, sp, (su, sv), (u, v), new, sigma)
            return
        w = sv[o]
        if w is None:
            return
        sw = llx(w)
        if not sw.ok:
            return
        sigma.append(sw)
        if w.tag > 0:
            inner = B.join(u.key, side, B.retag(w, sw, -1, hvk[o]), (su[o], hw))
            new = B.top(v.key, side, (sv[side], hvk[side]), inner, hu, is_root)[0]
            self._commit(R3_6, sp, (su, sv, sw), (u, v, w), new, sigma)
            return
        if sw[LEFT] is None:
            return
        hwk = kid_heights(w, hvk[o])
        a = B.join(v.key, side, (sv[side], hvk[side]), (sw[side], hwk[side]))
        b = B.join(u.key, side, (sw[o], hwk[o]), (su[o], hw))
        new = B.top(w.key, side, a, b, hu, is_root)[0]
        self._commit(R3_7 if w.tag == 0 else R3_8, sp, (su, sv, sw), (u, v, w), new, sigma)

    def _positive(self, sp, su, sv, side, sigma) -> None:
        u, v = su.record, sv.record
        o = 1 - side
        is_root = sp.record.key == inf
        hu = 0
        hk = kid_heights(u, hu)
        hv, hw = hk[side], hk[o]
        if _toward(u.rbf, side) >= 0:
            near = B.retag(v, sv, -1, hv)
            new = B.top(u.key, side, near, (su[o], hw), hu, is_root)[0]
            self._commit(R4, sp, (su, sv), (u, v), new, sigma)
            return
        w = su[o]
        sw = llx(w)
        if not sw.ok:
            return
        sigma.append(sw)
        if w.tag < 0:
            self._negative(sp, su, sw, o, sigma)
            return
        # V lists v and w as siblings, so order them left to right.
        pair = (sv, sw) if side == LEFT else (sw, sv)
        if w.tag > 0:
            new = B.top(u.key, side, B.retag(v, sv, -1, hv), B.retag(w, sw, -1, hw),
                        hu, is_root)[0]
            self._commit(R4_9, sp, (su,) + pair, (u, v, w), new, sigma)
            return
        if sw[LEFT] is None:
            return
        hwk = kid_heights(w, hw)
        v2 = B.retag(v, sv, -1, hv)
        if _toward(w.rbf, o) >= 0:
            inner = B.join(u.key, side, v2, (sw[side], hwk[side]))
            new = B.top(w.key, side, inner, (sw[o], hwk[o]), hu, is_root)[0]
            self._commit(R4_10, sp, (su,) + pair, (u, v, w), new, sigma)
            return
        x = sw[side]
        sx = llx(x)
        if not sx.ok:
            return
        sigma.append(sx)
        if x.tag > 0:
            inner = B.join(u.key, side, v2, B.retag(x, sx, -1, hwk[side]))
            new = B.top(w.key, side, inner, (sw[o], hwk[o]), hu, is_root)[0]
            self._commit(R4_11, sp, (su,) + pair + (sx,), (u, v, w, x), new, sigma)
            return
        if sx[LEFT] is None:
            return
        hxk = kid_heights(x, hwk[side])
        a = B.join(u.key, side, v2, (sx[side], hxk[side]))
        b = B.join(w.key, side, (sx[o], hxk[o]), (sw[o], hwk[o]))
        new = B.top(x.key, side, a, b, hu, is_root)[0]
        self._commit(R4_12 if x.tag == 0 else R4_13, sp, (su,) + pair + (sx,),
                     (u, v, w, x), new, sigma)

    def _commit(self, name, sp, rest, R, new, sigma) -> bool:
        p, u = sp.record, rest[0].record
        fld = (p, LEFT if u is sp[LEFT] else RIGHT)
        if self._scx((sp,) + tuple(rest), R, fld, new, sigma):
            self.step_counts[name] += 1
            return True
        return False

    # Quiescent checks --------------------------------------------------

    def violations(self) -> int:
        root = self.root()
        if root is None:
            return 0
        total = 0
        stack = [root]
        while stack:
            n = stack.pop()
            total += violation_weight(n.tag)
            if n.mut[LEFT] is not None:
                stack.append(n.mut[LEFT])
                stack.append(n.mut[RIGHT])
        return total

    def validate(self, strict: bool = False) -> list[str]:
        """Invariant violations found at quiescence.

        Always checks ordering, tag ranges and that every stored rbf equals
        the actual relaxed balance factor and lies in {-1, 0, 1}.  strict
        additionally requires every tag to be zero, which makes the tree an
        AVL tree.
        """
        errs = self._check_shape()
        root = self.root()
        if root is None:
            return errs
        if root.tag != 0:
            errs.append(f"root tag {root.tag} != 0")
        check_subtree(root, errs)
        if strict and self.violations():
            errs.append(f"{self.violations()} violations remain")
        return errs


def check_subtree(root, errs: list) -> int:
    """Check tags and rbf values below root; returns rh(root)."""
    heights: dict = {}
    stack = [(root, False)]
    while stack:
        n, done = stack.pop()
        if n.mut[LEFT] is None:
            if n.tag < 0:
                errs.append(f"leaf {n.key!r} has tag {n.tag}")
            if n.rbf != 0:
                errs.append(f"leaf {n.key!r} has rbf {n.rbf}")
            heights[id(n)] = n.tag
            continue
        if not done:
            stack.append((n, True))
            stack.append((n.mut[LEFT], False))
            stack.append((n.mut[RIGHT], False))
            continue
        lh = heights[id(n.mut[LEFT])]
        rh = heights[id(n.mut[RIGHT])]
        if n.tag < -1:
            errs.append(f"node {n.key!r} has tag {n.tag}")
        if lh - rh != n.rbf:
            errs.append(f"node {n.key!r} stores rbf {n.rbf} but has {lh - rh}")
        if abs(lh - rh) > 1:
            errs.append(f"node {n.key!r} has relaxed balance factor {lh - rh}")
        heights[id(n)] = max(lh, rh) + 1 + n.tag
    return heights[id(root)]
