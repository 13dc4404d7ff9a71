import pytest

from scanplan.baseline import greedy_target_sampling
from scanplan.errors import CoverageFailure
from scanplan.visibility import Viewpoint, VisibleSet


def cands(sets, xs=None):
    xs = xs or list(range(len(sets)))
    vps = [Viewpoint(i, (float(x), 0.0, 0.0), (0.0, 0.0, -1.0)) for i, x in enumerate(xs)]
    vis = {i: VisibleSet(i, tuple(s), tuple(0.0 for _ in s), tuple(0.05 for _ in s))
           for i, s in enumerate(sets)}
    return vps, vis


def test_single_candidate():
    vps, vis = cands([["a", "b", "c"], ["a"]])
    assert [v.id for v in greedy_target_sampling(vps, vis, "abc")] == [0]


def test_trace_by_hand():
    vps, vis = cands([["a", "b"], ["b", "c"], ["c"]])
    picked = greedy_target_sampling(vps, vis, "abc")
    assert [v.id for v in picked] == [0, 1]


def test_ties_go_to_the_nearer_candidate():
    vps, vis = cands([["a", "b"], ["c"], ["d"]], xs=[0, 500, 10])
    picked = greedy_target_sampling(vps, vis, "abcd")
    assert [v.id for v in picked] == [0, 2, 1]


def test_missing_mp_named():
    vps, vis = cands([["a"], ["b"]])
    with pytest.raises(CoverageFailure) as err:
        greedy_target_sampling(vps, vis, ["a", "b", "tight"])
    assert err.value.uncovered == ("tight",)


def test_size_and_union():
    sets = [["a", "b"], ["b"], ["c", "d"], ["d", "e"], ["a", "e"]]
    vps, vis = cands(sets)
    picked = greedy_target_sampling(vps, vis, "abcde")
    assert len(picked) <= len(vps)
    assert set().union(*(vis[v.id].mp_ids for v in picked)) == set("abcde")
