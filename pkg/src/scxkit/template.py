"""Generic driver for tree updates built from LLX and SCX, plus a checker
for the ten postconditions an update's SCX arguments must satisfy.

An update searches for the part of the structure it wants to change, runs
LLX on a top-down sequence of nodes, and then performs a single SCX that
swings one link to a freshly built replacement subtree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

from .sync import DUMMY, FAIL, DataRecord, Snapshot, llx, scx


class TemplateHooks(Protocol):
    """Structure-specific pieces of an update.

    The snapshots list passed to the later hooks holds s_0..s_i; each
    snapshot carries its record, so immutable fields are read from there.
    """

    def search_phase(self, args) -> Any: ...

    def update_not_needed(self, m, snaps: Sequence[Snapshot] | None) -> bool: ...

    def conflict(self, node, snap: Snapshot, m) -> bool: ...

    def condition(self, snaps: Sequence[Snapshot], m) -> bool: ...

    def next_node(self, snaps: Sequence[Snapshot], m) -> DataRecord: ...

    def scx_arguments(self, snaps: Sequence[Snapshot], m) -> "ScxArguments": ...

    def result(self, m, snaps: Sequence[Snapshot] | None) -> Any: ...


@dataclass
class ScxArguments:
    V: Sequence[Snapshot]
    R: Sequence[DataRecord]
    fld: tuple
    new: Any
    extra: dict = field(default_factory=dict)


def root_of(m):
    """The first node of a search result: m itself, or m[0] for sequences."""
    if isinstance(m, DataRecord):
        return m
    return m[0]


def run_update(hooks: TemplateHooks, args):
    """One attempt at an update; returns the hook's result or FAIL."""
    m = hooks.search_phase(args)
    return update_phase(hooks, m)


def update_phase(hooks: TemplateHooks, m):
    if hooks.update_not_needed(m, None):
        return hooks.result(m, None)
    snaps: list[Snapshot] = []
    node = root_of(m)
    while True:
        s = llx(node)
        if not s.ok or hooks.conflict(node, s, m):
            return FAIL
        snaps.append(s)
        if hooks.condition(snaps, m):
            break
        node = hooks.next_node(snaps, m)
    if hooks.update_not_needed(m, snaps):
        return hooks.result(m, snaps)
    a = hooks.scx_arguments(snaps, m)
    if scx(a.V, a.R, a.fld, a.new):
        return hooks.result(m, snaps)
    return FAIL


def _children(rec):
    return [v for v in rec.mut if isinstance(v, DataRecord)]


def _snap_children(s: Snapshot):
    return [v for v in s.values if isinstance(v, DataRecord)]


def _is_down_tree(root, edges: dict) -> bool:
    """edges maps node -> children; true iff every node reachable from root
    has in-degree one and no node repeats."""
    seen = set()
    stack = [root]
    while stack:
        n = stack.pop()
        if id(n) in seen:
            return False
        seen.add(id(n))
        stack.extend(edges.get(id(n), ()))
    indeg: dict = {}
    for kids in edges.values():
        for k in kids:
            indeg[id(k)] = indeg.get(id(k), 0) + 1
    return all(c <= 1 for c in indeg.values()) and indeg.get(id(root), 0) == 0


def bfs_order(root, edges_of) -> dict:
    """Map id(node) -> (depth, path) for a left-to-right breadth-first walk."""
    pos = {id(root): (0, "")}
    queue = [(root, 0, "")]
    while queue:
        nxt = []
        for node, d, path in queue:
            for i, c in enumerate(edges_of(node)):
                if id(c) not in pos:
                    p = path + chr(ord("a") + i)
                    pos[id(c)] = (d + 1, p)
                    nxt.append((c, d + 1, p))
        queue = nxt
    return pos


def validate_scx_arguments(a: ScxArguments, sigma: Sequence[Snapshot], m=(),
                           existing: Sequence[DataRecord] = ()) -> list[str]:
    """Return the names of the postconditions PC1..PC10 that a violates.

    sigma holds the snapshots from the update's LLXs, m the nodes of the
    search result, existing any extra records known to predate the update.
    Mutable values that are DataRecords are treated as child links; other
    values are payload.
    """
    bad: list[str] = []
    sig_recs = [s.record for s in sigma]
    sig_ids = {id(r) for r in sig_recs}
    v_recs = [s.record for s in a.V]
    v_ids = {id(r) for r in v_recs}

    # PC1: every snapshot in V came from one of the update's LLXs.  The LLX
    # order may differ from the traversal order used for V, so this is a
    # containment check.
    if not all(any(s is t for t in sigma) for s in a.V) or len(v_ids) != len(v_recs):
        bad.append("PC1")
    parent, idx = a.fld
    if id(parent) not in v_ids:
        bad.append("PC2")
    if not all(id(r) in v_ids for r in a.R):
        bad.append("PC3")
    m_nodes = [m] if isinstance(m, DataRecord) else list(m)
    if any(id(n) not in v_ids for n in m_nodes):
        bad.append("PC4")

    old = None
    for s in a.V:
        if s.record is parent:
            old = s.values[idx]
    old_is_link = isinstance(old, DataRecord) or old is None
    structural = isinstance(a.new, DataRecord)

    # Edges and fringe of what the LLXs saw.
    sig_edges = {id(s.record): _snap_children(s) for s in sigma}
    f_sigma = {id(c) for kids in sig_edges.values() for c in kids} - sig_ids
    known = sig_ids | f_sigma | {id(r) for r in existing}

    # N: the fresh records reachable from new without passing known records.
    n_nodes: list = []
    f_n: list = []
    if structural:
        stack = [a.new]
        seen: set = set()
        while stack:
            x = stack.pop()
            if id(x) in seen:
                continue
            seen.add(id(x))
            if id(x) in known and x is not a.new:
                f_n.append(x)
                continue
            n_nodes.append(x)
            for c in _children(x):
                stack.append(c)
    n_ids = {id(x) for x in n_nodes}
    f_n_ids = {id(x) for x in f_n}

    if old_is_link:
        if old is None:
            if a.R or f_n:
                bad.append("PC5")
        elif not a.R and f_n_ids != {id(old)}:
            bad.append("PC6")
        if a.R:
            r_ids = {id(r) for r in a.R}
            snap_of = {id(s.record): s for s in sigma}
            r_edges = {}
            ok = True
            for r in a.R:
                s = snap_of.get(id(r))
                if s is None:
                    ok = False
                    break
                r_edges[id(r)] = _snap_children(s)
            f_r = {id(c) for kids in r_edges.values() for c in kids} - r_ids
            sigma_tree = _is_down_tree(sig_recs[0], sig_edges) if sig_recs else True
            if sigma_tree:
                if not ok or old is None or id(old) not in r_ids:
                    bad.append("PC7")
                else:
                    reach = set()
                    stack = [old]
                    while stack:
                        x = stack.pop()
                        if id(x) in reach or id(x) not in r_ids:
                            continue
                        reach.add(id(x))
                        stack.extend(r_edges[id(x)])
                    if reach != r_ids or not _is_down_tree(old, r_edges) or f_r != f_n_ids:
                        bad.append("PC7")

    if structural:
        n_edges = {id(x): _children(x) for x in n_nodes}
        if not _is_down_tree(a.new, n_edges):
            bad.append("PC8")
        if id(a.new) in known or any(id(x) in known for x in n_nodes) or \
                any(x.info is not DUMMY or x.marked for x in n_nodes):
            bad.append("PC9")
        elif any(id(x) in n_ids for x in sig_recs):
            bad.append("PC9")

    # PC10: V follows a breadth-first walk of what the LLXs saw.
    if sig_recs:
        snap_of = {id(s.record): s for s in sigma}
        pos = bfs_order(sig_recs[0], lambda r: _snap_children(snap_of[id(r)])
                        if id(r) in snap_of else [])
        keys = [pos.get(id(r)) for r in v_recs]
        if any(k is None for k in keys) or keys != sorted(keys):
            bad.append("PC10")
    return bad
