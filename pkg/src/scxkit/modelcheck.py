"""Small-scope model checking of LLX/SCX/VLX.

Threads run as greenlets.  The sync layer calls a hook before every shared
access, and the hook hands control back to a scheduler, so each access is
one scheduling step.  Executions are replayed from scratch for every
schedule (stateless search).

Two explorers are provided:

  explore_all   every interleaving; only feasible for tiny programs
  explore_dpor  one interleaving per equivalence class of dependent-access
                orders (dynamic partial-order reduction with vector clocks)

Two accesses are dependent when they touch the same field of the same
object and at least one writes.  The explorers are generic over the
programs they run; the LLX/SCX scenarios, the linearizability check and
the failure-justification check sit on top.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable

import greenlet

from . import sync
from .sync import FAIL, FINALIZED, DataRecord, Snapshot, llx, scx, vlx


class ScheduleLimit(RuntimeError):
    pass


@dataclass
class Execution:
    """One finished run: the schedule, the trace and what the program logged."""
    schedule: list
    trace: list
    log: Any
    error: BaseException | None = None


class _Runner:
    """Runs one execution, letting choose() pick the next thread at each step."""

    def __init__(self, setup, max_steps):
        self.setup = setup
        self.max_steps = max_steps

    def run(self, choose):
        ctx, fns = self.setup()
        main = greenlet.getcurrent()
        pending: dict = {}
        threads = {}

        # Objects are named by order of first access, which replays
        # identically, and kept alive so no id is reused within a run.
        names: dict = {}

        def hook(obj, fld, is_write):
            g = greenlet.getcurrent()
            if g is main:
                return
            ent = names.get(id(obj))
            if ent is None:
                ent = names[id(obj)] = (len(names), obj)
            main.switch(("acc", (ent[0], fld), _access_kind(is_write)))

        def wrap(fn):
            def body():
                fn()
                return ("done",)
            return body

        old_hook = sync.get_hook()
        sync.set_hook(hook)
        trace, schedule = [], []
        error = None
        try:
            for tid, fn in enumerate(fns):
                g = greenlet.greenlet(wrap(fn), parent=main)
                threads[tid] = g
            for tid, g in threads.items():
                ctx.step = 0
                ctx.tid = tid
                r = g.switch()
                if r[0] == "acc":
                    pending[tid] = (r[1], r[2])
            step = 0
            while pending:
                if step >= self.max_steps:
                    raise ScheduleLimit(f"execution exceeded {self.max_steps} steps")
                tid = choose(step, dict(pending), trace)
                if tid is None:
                    return None
                key, w = pending.pop(tid)
                trace.append((tid, key, w))
                schedule.append(tid)
                step += 1
                ctx.step = step
                ctx.tid = tid
                r = threads[tid].switch()
                if r[0] == "acc":
                    pending[tid] = (r[1], r[2])
        except ScheduleLimit:
            raise
        except BaseException as e:  # a thread raised; report it with the run
            error = e
        finally:
            sync.set_hook(old_hook)
            for g in threads.values():
                if not g.dead:
                    g.throw(greenlet.GreenletExit)
        return Execution(schedule, trace, ctx, error)


def explore_all(setup, on_execution, max_steps: int = 10_000, limit: int | None = None) -> int:
    """Run every interleaving; returns the number of executions."""
    runner = _Runner(setup, max_steps)
    stack: list[list] = []  # per depth: [choices, index]
    count = 0
    while True:
        def choose(step, pending, trace):
            order = sorted(pending)
            if step < len(stack):
                return stack[step][0][stack[step][1]]
            stack.append([order, 0])
            return order[0]

        ex = runner.run(choose)
        count += 1
        on_execution(ex)
        if limit is not None and count >= limit:
            return count
        while stack and stack[-1][1] + 1 >= len(stack[-1][0]):
            stack.pop()
        if not stack:
            return count
        stack[-1][1] += 1


def _access_kind(is_write):
    """False for a read, True for a CAS, ("=", v) for a plain store of v.

    Only simple values are kept; a store of anything else never commutes.
    """
    if isinstance(is_write, sync.Store):
        v = is_write.value
        if v is None or isinstance(v, (bool, int)):
            return ("=", v)
        return True
    return bool(is_write)


def _dependent(a, b) -> bool:
    if a[0] != b[0] or not (a[1] or b[1]):
        return False
    # Two plain stores of the same value commute.
    return not (isinstance(a[1], tuple) and a[1] == b[1])


@dataclass
class _State:
    pending: dict
    sleep: dict = field(default_factory=dict)  # tid -> access known redundant here
    backtrack: set = field(default_factory=set)
    done: set = field(default_factory=set)
    taken: int = -1

    def child_sleep(self) -> dict:
        """Sleep set for the state reached by taking self.taken."""
        acc = self.pending[self.taken]
        out = {}
        for q, a in self.sleep.items():
            if not _dependent(a, acc):
                out[q] = a
        for q in self.done:
            if q != self.taken and not _dependent(self.pending[q], acc):
                out[q] = self.pending[q]
        return out


def explore_dpor(setup, on_execution, max_steps: int = 10_000, limit: int | None = None) -> int:
    """Explore one schedule per class of equivalent interleavings."""
    runner = _Runner(setup, max_steps)
    stack: list[_State] = []
    count = 0
    while True:
        clocks: list = []  # vector clock of each transition
        thread_clock: dict = {}

        def choose(step, pending, trace):
            # Account for the transition executed just before this state.
            if trace:
                _advance(clocks, thread_clock, trace)
            if step < len(stack):
                return stack[step].taken
            st = _State(pending)
            # For each enabled thread, find the last transition it races with.
            for p, acc in pending.items():
                cp = thread_clock.get(p, {})
                for i in range(len(trace) - 1, -1, -1):
                    q, key, w = trace[i]
                    if q == p or not _dependent((key, w), acc):
                        continue
                    if clocks[i].get(q, 0) <= cp.get(q, 0):
                        continue  # already ordered before p; not a race
                    pre = stack[i]
                    if p in pre.pending:
                        pre.backtrack.add(p)
                    else:
                        pre.backtrack.update(pre.pending)
                    break
            if stack:
                st.sleep = stack[-1].child_sleep()
            awake = [p for p in sorted(pending) if p not in st.sleep]
            if not awake:
                # Every continuation here was covered by an earlier run.
                blocked[0] = True
                stack.append(st)
                return None
            first = awake[0]
            st.backtrack.add(first)
            st.done.add(first)
            st.taken = first
            stack.append(st)
            return first

        blocked = [False]
        ex = runner.run(choose)
        if ex is not None:
            count += 1
            on_execution(ex)
            if limit is not None and count >= limit:
                return count
            del stack[len(ex.schedule):]
        else:
            stack.pop()  # the blocked state
        while stack and not (stack[-1].backtrack - stack[-1].done - set(stack[-1].sleep)):
            stack.pop()
        if not stack:
            return count
        st = stack[-1]
        p = min(st.backtrack - st.done - set(st.sleep))
        st.done.add(p)
        st.taken = p


def _advance(clocks, thread_clock, trace) -> None:
    n = len(trace) - 1
    tid, key, w = trace[n]
    cv = dict(thread_clock.get(tid, {}))
    for j in range(n):
        if trace[j][0] != tid and _dependent(trace[j][1:], (key, w)):
            for t, c in clocks[j].items():
                if c > cv.get(t, 0):
                    cv[t] = c
    cv[tid] = n + 1
    clocks.append(cv)
    thread_clock[tid] = cv


# LLX/SCX scenarios ---------------------------------------------------------


class Cell(DataRecord):
    """A test record with a name and a few mutable fields."""
    __slots__ = ("name",)

    def __init__(self, name, values):
        DataRecord.__init__(self, list(values))
        self.name = name

    def __repr__(self):
        return f"Cell({self.name})"


class Token:
    """A unique value for one SCX, so no two SCXs ever store the same new value."""
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


@dataclass
class OpRecord:
    tid: int
    kind: str
    args: tuple
    inv: int = -1
    resp: int = -1
    result: Any = None
    linked: dict = field(default_factory=dict)  # record name -> llx OpRecord


class _Ctx:
    def __init__(self):
        self.step = 0
        self.tid = 0
        self.ops: list[OpRecord] = []
        self.cells: dict = {}
        self.info_history = None


def llx_scx_setup(initial: dict, programs: list, check_p1: bool = True):
    """Build a setup() for the explorers.

    initial maps record names to lists of initial field values.  Each program
    is a list of operations:

      ("llx", name)
      ("scx", V names, R names, (name, index))    stores a fresh Token
      ("vlx", V names)

    scx and vlx use the thread's most recent llx snapshots; if any of them
    is missing (that llx failed) the operation is skipped.
    """
    def setup():
        ctx = _Ctx()
        for n, vals in initial.items():
            ctx.cells[n] = Cell(n, vals)
        if check_p1:
            ctx.info_history = sync.enable_info_history()
        else:
            sync.disable_info_history()
        fns = [_thread_fn(ctx, tid, prog) for tid, prog in enumerate(programs)]
        return ctx, fns
    return setup


def _thread_fn(ctx: _Ctx, tid: int, prog):
    def run():
        snaps: dict = {}
        for j, op in enumerate(prog):
            kind = op[0]
            rec = OpRecord(tid, kind, op[1:])
            if kind == "llx":
                rec.inv = ctx.step
                ctx.ops.append(rec)
                res = llx(ctx.cells[op[1]])
                rec.resp = ctx.step
                rec.result = res
                if isinstance(res, Snapshot):
                    snaps[op[1]] = (res, rec)
                else:
                    snaps.pop(op[1], None)
            elif kind in ("scx", "vlx"):
                names = op[1]
                if any(n not in snaps for n in names):
                    continue
                rec.linked = {n: snaps[n][1] for n in names}
                V = [snaps[n][0] for n in names]
                rec.inv = ctx.step
                ctx.ops.append(rec)
                if kind == "scx":
                    R = [ctx.cells[n] for n in op[2]]
                    fname, idx = op[3]
                    tok = Token(f"t{tid}.{j}")
                    rec.args = rec.args + (tok,)
                    rec.result = scx(V, R, (ctx.cells[fname], idx), tok)
                else:
                    rec.result = vlx(V)
                rec.resp = ctx.step
            else:
                raise ValueError(f"unknown operation {kind!r}")
    return run


def _counts(res) -> bool:
    """Whether an operation's outcome takes effect and must be linearized."""
    return not (res is FAIL or res is False)


def find_linearization(initial: dict, ops: list[OpRecord]):
    """Order of the effective operations that the sequential model accepts, or None.

    Sequential model: each record has its field values, a finalized flag and
    a version bumped by every successful scx whose V contains it.  An llx
    returns the current values (or FINALIZED once finalized); an scx or vlx
    may succeed only if no record in V changed since its linked llx.
    """
    eff = [o for o in ops if _counts(o.result)]
    n = len(eff)
    fields = {k: list(v) for k, v in initial.items()}
    version = {k: 0 for k in initial}
    final = set()
    seen_version: dict = {}  # id(llx op) -> version at its linearization
    placed = [False] * n
    order: list = []

    def ready(i):
        o = eff[i]
        return all(placed[j] or not (eff[j].resp < o.inv) for j in range(n) if j != i)

    def apply(o):
        """Return an undo closure, or None if o is not allowed now."""
        if o.kind == "llx":
            name = o.args[0]
            if o.result is FINALIZED:
                if name not in final:
                    return None
                return lambda: None
            if name in final or list(o.result.values) != fields[name]:
                return None
            seen_version[id(o)] = version[name]
            return lambda: seen_version.pop(id(o))
        names = o.args[0]
        for nm in names:
            l = o.linked[nm]
            if id(l) not in seen_version or seen_version[id(l)] != version[nm]:
                return None
        if o.kind == "vlx":
            return lambda: None
        R, (fname, idx), tok = o.args[1], o.args[2], o.args[3]
        old_val = fields[fname][idx]
        old_final = set(final)
        fields[fname][idx] = tok
        final.update(R)
        for nm in names:
            version[nm] += 1

        def undo():
            fields[fname][idx] = old_val
            final.clear()
            final.update(old_final)
            for nm in names:
                version[nm] -= 1
        return undo

    def dfs():
        if len(order) == n:
            return True
        for i in range(n):
            if placed[i] or not ready(i):
                continue
            undo = apply(eff[i])
            if undo is None:
                continue
            placed[i] = True
            order.append(eff[i])
            if dfs():
                return True
            order.pop()
            placed[i] = False
            undo()
        return False

    return list(order) if dfs() else None


def unjustified_failures(ops: list[OpRecord]) -> list[OpRecord]:
    """Failed operations with no interfering scx to blame.

    An llx may fail only if another thread's scx with that record in V
    overlaps it.  An scx or vlx may fail only if such an scx overlaps the
    span from the invocation of a linked llx to the failing operation's
    response.
    """
    scxs = [o for o in ops if o.kind == "scx"]
    bad = []
    for o in ops:
        if _counts(o.result):
            continue
        if o.kind == "llx":
            spans = [(o.args[0], o.inv, o.resp)]
        else:
            spans = [(nm, o.linked[nm].inv, o.resp) for nm in o.args[0]]
        ok = False
        for nm, lo, hi in spans:
            for s in scxs:
                if s.tid != o.tid and nm in s.args[0] and s.inv <= hi and s.resp >= lo:
                    ok = True
        if not ok:
            bad.append(o)
    return bad


@dataclass
class CheckReport:
    executions: int = 0
    non_linearizable: list = field(default_factory=list)
    unjustified: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    outcomes: set = field(default_factory=set)

    @property
    def ok(self) -> bool:
        return not (self.non_linearizable or self.unjustified or self.errors)


def check_llx_scx(initial: dict, programs: list, dpor: bool = True, check_p1: bool = True,
                  limit: int | None = None) -> CheckReport:
    """Explore every schedule of the programs and check each resulting history."""
    rep = CheckReport()

    def on_execution(ex: Execution):
        rep.executions += 1
        ctx = ex.log
        if ex.error is not None:
            rep.errors.append((ex.schedule, ex.error))
            return
        ops = ctx.ops
        if find_linearization(initial, ops) is None:
            rep.non_linearizable.append((ex.schedule, ops))
        bad = unjustified_failures(ops)
        if bad:
            rep.unjustified.append((ex.schedule, bad))
        final = tuple((n, tuple(repr(v) for v in c.mut), c.marked) for n, c in sorted(ctx.cells.items()))
        results = tuple((o.tid, o.kind, _result_key(o.result)) for o in ops)
        rep.outcomes.add((final, results))

    setup = llx_scx_setup(initial, programs, check_p1)
    explorer = explore_dpor if dpor else explore_all
    try:
        explorer(setup, on_execution, limit=limit)
    finally:
        sync.disable_info_history()
    return rep


def _result_key(res):
    if isinstance(res, Snapshot):
        return tuple(repr(v) for v in res.values)
    return repr(res)


# Canned scenarios used by the tests and the acceptance suite.
SCENARIOS: dict = {
    "one-scx-one-llx": (
        {"a": [0], "b": [0]},
        [[("llx", "a"), ("scx", ("a",), ("a",), ("a", 0))],
         [("llx", "a"), ("llx", "b")]],
    ),
    "racing-scx-chain": (
        {"a": [0], "b": [0], "c": [0]},
        [[("llx", "a"), ("scx", ("a",), (), ("a", 0))],
         [("llx", "a"), ("scx", ("a",), (), ("a", 0))]],
    ),
    "overlap-finalize": (
        {"a": [0], "b": [0], "c": [0]},
        [[("llx", "a"), ("scx", ("a",), ("a",), ("a", 0))],
         [("llx", "b"), ("scx", ("b",), ("b",), ("b", 0))],
         [("llx", "a"), ("llx", "b")]],
    ),
    "three-way-scx": (
        {"a": [0], "b": [0], "c": [0]},
        [[("llx", "a"), ("scx", ("a",), (), ("a", 0))],
         [("llx", "b"), ("scx", ("b",), (), ("b", 0))],
         [("llx", "c"), ("scx", ("c",), (), ("c", 0))]],
    ),
    "llx-vlx": (
        {"a": [0], "b": [0]},
        [[("llx", "a"), ("vlx", ("a",))],
         [("llx", "a"), ("scx", ("a",), (), ("a", 0))]],
    ),
}
