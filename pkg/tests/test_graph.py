import math

import numpy as np
import pytest

from horolab import graph as gr
from horolab.acceptance import brute_force_slacks
from horolab.errors import BudgetBlowup, BudgetMismatch, DanglingEdge, NegativeSlack


def toy():
    return gr.build_graph(["v"], [("v", "v", 1.0), ("v", "v", 1.5)])


def test_build_examples():
    G = toy()
    assert G.vertex_ids == ["v"] and len(G.edges) == 2
    with pytest.raises(NegativeSlack):
        gr.build_graph(["v"], [("v", "v", -0.5)])
    with pytest.raises(DanglingEdge):
        gr.build_graph(["v"], [("v", "w", 0.5)])
    G2 = gr.build_graph(["a", "b"], [])
    assert gr.enumerate_path_slacks(G2, "a", "b", 5.0).values == []


def test_graph_json_roundtrip():
    G = toy()
    again = gr.graph_from_json(G.to_json())
    assert again.to_json() == G.to_json()


def test_toy_zset():
    z = gr.enumerate_path_slacks(toy(), "v", "v", 3.2)
    assert z.slacks.tolist() == [0.0, 1.0, 1.5, 2.0, 2.5, 3.0]
    assert z.slacks.tolist() == brute_force_slacks(toy(), "v", "v", 3.2)


def test_single_loop_progression():
    G = gr.build_graph(["v"], [("v", "v", 1.0)])
    assert gr.enumerate_path_slacks(G, "v", "v", 3.5).slacks.tolist() == [0.0, 1.0, 2.0, 3.0]


def test_no_path():
    G = gr.build_graph(["a", "b"], [("a", "a", 1.0)])
    assert len(gr.enumerate_path_slacks(G, "a", "b", 10.0).values) == 0


def test_witnesses_are_shortlex_paths():
    G = gr.build_graph(["a", "b"], [("a", "b", 0.5), ("b", "a", 0.75), ("a", "a", 1.25)])
    z = gr.enumerate_path_slacks(G, "a", "a", 4.0)
    for (v, w), (lo, hi) in zip(z.values, z.lengths):
        assert gr.witness_is_path(G, w, "a", "a")
        assert gr.path_slack(G, w) == pytest.approx(v, abs=1e-12)
        assert len(w) == lo <= hi
    # 1.25 is reached both by the loop and by the 2-cycle a->b->a (0.5+0.75)
    rec = dict((v, w) for v, w in z.values)
    assert rec[1.25] == ("e2",)


def test_blowup():
    G = gr.build_graph(["v"], [("v", "v", 0.01 + 0.001 * i) for i in range(4)])
    with pytest.raises(BudgetBlowup):
        gr.enumerate_path_slacks(G, "v", "v", 2.0, cap=1000)


def test_family_edge_expansion():
    fam = {"base": 1.0, "correction_params": [1.0, 1.0], "c": 1.5, "k_min": 0}
    G = gr.build_graph(["v"], [{"id": "f", "src": "v", "dst": "v", "family": fam}])
    vals = [s for _, s in G.edge("f").values(1e-9)]
    assert vals[0] == pytest.approx(1.0 + 2 * math.log(2))
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] - 1.0 < 1e-8
    z = gr.enumerate_path_slacks(G, "v", "v", 2.0, expand_tol=1e-6)
    for v, w in z.values[1:]:
        assert gr.path_slack(G, w) == pytest.approx(v, abs=1e-12)


def test_derived_sets_harmonic():
    S = np.r_[0.0, 1.0 / np.arange(1, 10_001)]
    d1 = gr.derived_set(S, 1e-6)
    # at a single scale only the crowded tail near 0 survives
    assert d1.size > 0 and d1.max() <= 1e-3
    # the ladder version separates the accumulation point from its approximants
    S0 = np.r_[0.0, 1.0 / np.arange(1, 101)]
    S1 = np.r_[0.0, 1.0 / np.arange(1, 200_001)]
    d = gr.derived_ladder([S0, S1, S1], [1e-5, 1e-13], [1e-8, 1e-15], 2)
    assert d[0].tolist() == [0.0]
    assert d[1].size == 0


def test_derived_set_finite_gapped():
    assert gr.derived_set([0.0, 1.0, 2.5, 4.0], 0.1).size == 0


def test_hausdorff_1d():
    assert gr.hausdorff_1d([0.0, 1.0], [0.0, 1.05]) == pytest.approx(0.05)
    assert gr.hausdorff_1d([], []) == 0.0
    assert math.isinf(gr.hausdorff_1d([1.0], []))


def test_finite_graph_has_no_accumulation():
    G = toy()
    rep = gr.check_filtration(G, "v", "v", 6.0, 1e-3, max_level=2)
    assert all(len(lv.derived) == 0 for lv in rep.levels)
    # paths with two or more edges are isolated, so they are not seen as limits
    assert not rep.ok
    assert rep.depth == 1


def test_model_family_derived_set_is_family_limits():
    P = gr.Primitive
    prims = [P("p", "v", "v", 0.5, 1.0, 0.5)]
    mk = lambda tol: gr.twist_closure_graph(["v"], prims, {"v": 1.5}, 6.0, tol)
    rep = gr.check_filtration(mk, "v", "v", 6.0, 5e-3, max_level=1)
    (lv,) = rep.levels
    assert lv.ok
    # every level-1 point is within h of a slack of a path with two or more edges
    hom = np.array(lv.hom)
    assert all(np.min(np.abs(hom - v)) <= 5e-3 for v in lv.derived)
    assert min(lv.derived) == pytest.approx(2.0, abs=1e-9)


def test_subadditivity_examples():
    G = gr.build_graph(["x"], [("x", "x", 1.0)])
    half = gr.enumerate_path_slacks(G, "x", "x", 1.5)
    full = gr.enumerate_path_slacks(G, "x", "x", 3.0)
    assert gr.check_subadditivity(half, half, full) == []
    T = toy()
    h = gr.enumerate_path_slacks(T, "v", "v", 1.6)
    f = gr.enumerate_path_slacks(T, "v", "v", 3.2)
    broken = gr.TruncatedZSet(f.source, f.target, f.budget, f.tolerance, [p for p in f.values if p[0] != 2.5], f.lengths)
    assert gr.check_subadditivity(h, h, broken) == [2.5]
    with pytest.raises(BudgetMismatch):
        gr.check_subadditivity(f, f, f)


def ray_graph():
    return gr.build_graph(
        [{"id": "x", "flag": "imc"}, {"id": "w", "flag": "infinite_leaf"}],
        [("x", "x", 1.0), ("x", "x", 1.3), ("x", "w", 0.7), ("w", "x", 0.9)],
    )


def test_ray_threshold_example():
    rho, z = gr.ray_threshold(ray_graph(), "x", "x")
    assert rho == pytest.approx(1.6)
    assert z.slacks.tolist() == [0.0, 1.0, 1.3]
    assert z.contains(2.0) and z.contains(2.3) and z.contains(100.0)
    assert not z.contains(1.5)


def test_ray_threshold_without_leaves():
    rho, z = gr.ray_threshold(toy(), "v", "v", 3.2)
    assert math.isinf(rho)
    assert z.slacks.tolist() == gr.enumerate_path_slacks(toy(), "v", "v", 3.2).slacks.tolist()


def test_ray_threshold_leaf_vertex():
    G = gr.build_graph([{"id": "w", "flag": "infinite_leaf"}], [("w", "w", 1.0)])
    rho, z = gr.ray_threshold(G, "w", "w")
    assert rho == 0.0
    assert z.contains(0.0) and z.contains(0.37)


@pytest.mark.parametrize("nv", [1, 2, 3])
def test_census_counts(nv):
    names = [f"v{i}" for i in range(nv)]
    edges = [(names[i], names[(i + 1) % nv], 0.5 + 0.25 * i) for i in range(nv)]
    rep = gr.census(gr.build_graph(names, edges))
    assert rep.count == 2 * nv + 1
    assert all(rep.reversal_ok.values())


def test_census_membership():
    rep = gr.census(ray_graph())
    assert rep.member(gr.MarkedBusemannLabel(1.3, "x"), "x")
    assert not rep.member(gr.MarkedBusemannLabel(1.1, "x"), "x")


def test_twist_closure_additive_law():
    P = gr.Primitive
    p = P("p", "v", "v", 0.5, 1.0, 0.5)
    G = gr.twist_closure_graph(["v"], [p], {"v": 1.5}, 4.0, 1e-6)
    for e in G.edges:
        assert e.slack <= 4.0
    # single primitives contribute t exactly
    assert 1.0 in [e.slack for e in G.edges]
