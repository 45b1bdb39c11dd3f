from scxkit import sync
from scxkit.multiset import COUNT, NEXT, ListNode, Multiset
from scxkit.sync import FAIL, llx
from scxkit.template import ScxArguments, run_update, validate_scx_arguments


class CountingHooks:
    """Multiset insert of a key that is already present, as template hooks.

    The LLX chain visits p then r; the SCX bumps r's count.
    """

    def __init__(self, ms: Multiset):
        self.ms = ms
        self.llx_calls = 0

    def search_phase(self, key):
        r, p = self.ms._search(key)
        return (p, r, key)

    def update_not_needed(self, m, snaps):
        return False

    def conflict(self, node, snap, m):
        self.llx_calls += 1
        return node is m[0] and snap[NEXT] is not m[1]

    def condition(self, snaps, m):
        return len(snaps) == 2

    def next_node(self, snaps, m):
        return snaps[0][NEXT]

    def scx_arguments(self, snaps, m):
        return ScxArguments(tuple(snaps), (), (m[1], COUNT), snaps[1][COUNT] + 1)

    def result(self, m, snaps):
        return "ok"


class NothingToDo:
    calls = 0

    def search_phase(self, args):
        return ListNode(0, 1, None)

    def update_not_needed(self, m, snaps):
        return True

    def conflict(self, *a):
        self.calls += 1
        return False

    def condition(self, *a):
        return True

    def next_node(self, *a):
        raise AssertionError

    def scx_arguments(self, *a):
        raise AssertionError

    def result(self, m, snaps):
        return ("done", snaps)


class AlwaysConflict(CountingHooks):
    def conflict(self, node, snap, m):
        return True


def test_run_update_early_return_skips_llx():
    h = NothingToDo()
    assert run_update(h, None) == ("done", None)
    assert h.calls == 0


def test_run_update_multiset_present_key():
    ms = Multiset()
    ms.insert(5)
    h = CountingHooks(ms)
    assert run_update(h, 5) == "ok"
    assert h.llx_calls == 2
    assert ms.get(5) == 2


def test_run_update_conflict_fails():
    ms = Multiset()
    ms.insert(5)
    assert run_update(AlwaysConflict(ms), 5) is FAIL
    assert ms.get(5) == 1


def _three_nodes():
    ms = Multiset()
    for k in (1, 2, 3):
        ms.insert(k)
    p = ms.head.mut[NEXT]            # key 1
    r = p.mut[NEXT]                  # key 2
    rnext = r.mut[NEXT]              # key 3
    return p, r, rnext


def test_multiset_delete_arguments_are_clean():
    p, r, rnext = _three_nodes()
    sp, sr, sn = llx(p), llx(r), llx(rnext)
    new = ListNode(rnext.key, sn[COUNT], sn[NEXT])
    a = ScxArguments((sp, sr, sn), (r, rnext), (p, NEXT), new)
    assert validate_scx_arguments(a, (sp, sr, sn), m=(p, r)) == []


def test_r_outside_v_is_pc3():
    p, r, rnext = _three_nodes()
    sp, sr = llx(p), llx(r)
    new = ListNode(rnext.key, 1, rnext.mut[NEXT])
    a = ScxArguments((sp, sr), (r, rnext), (p, NEXT), new)
    assert "PC3" in validate_scx_arguments(a, (sp, sr))


def test_preexisting_new_is_pc9():
    p, r, rnext = _three_nodes()
    sp, sr, sn = llx(p), llx(r), llx(rnext)
    a = ScxArguments((sp, sr, sn), (r,), (p, NEXT), rnext)
    assert "PC9" in validate_scx_arguments(a, (sp, sr, sn))


def test_v_out_of_traversal_order_is_pc10():
    p, r, rnext = _three_nodes()
    sp, sr, sn = llx(p), llx(r), llx(rnext)
    new = ListNode(rnext.key, sn[COUNT], sn[NEXT])
    a = ScxArguments((sp, sn, sr), (r, rnext), (p, NEXT), new)
    assert "PC10" in validate_scx_arguments(a, (sp, sr, sn))


def test_fld_outside_v_is_pc2():
    p, r, rnext = _three_nodes()
    sr = llx(r)
    a = ScxArguments((sr,), (), (p, NEXT), ListNode(9, 1, r))
    assert "PC2" in validate_scx_arguments(a, (sr,))


def test_snapshot_not_from_update_is_pc1():
    p, r, rnext = _three_nodes()
    sp = llx(p)
    other = llx(p)
    a = ScxArguments((other,), (), (p, COUNT), 5)
    assert "PC1" in validate_scx_arguments(a, (sp,))


def test_search_node_missing_from_v_is_pc4():
    p, r, rnext = _three_nodes()
    sr = llx(r)
    a = ScxArguments((sr,), (), (r, COUNT), 5)
    assert "PC4" in validate_scx_arguments(a, (sr,), m=(p, r))


def test_validator_runs_on_payload_only_change():
    p, r, rnext = _three_nodes()
    sr = llx(r)
    a = ScxArguments((sr,), (), (r, COUNT), 5)
    assert validate_scx_arguments(a, (sr,)) == []
    assert sync.scx(a.V, a.R, a.fld, a.new)
