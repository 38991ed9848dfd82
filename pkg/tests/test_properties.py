import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from horolab import chainprox as cp
from horolab import graph as gr
from horolab import lipschitz as lp
from horolab import moebius as mb

coord = st.floats(-3, 3, allow_nan=False)
height = st.floats(0.2, 5, allow_nan=False)
angle = st.floats(-math.pi, math.pi, allow_nan=False)
tangent = st.builds(lambda x, y, a: mb.UnitTangent(complex(x, y), a), coord, height, angle)


@st.composite
def sl2(draw):
    a, b, c = (draw(st.floats(-4, 4, allow_nan=False)) for _ in range(3))
    assume(abs(a) > 0.05)
    return mb.normalize([[a, b], [c, (1 + b * c) / a]])


@given(sl2())
def test_normalize_idempotent(m):
    assert mb.normalize(m.to_array()).isclose(m, 1e-12)


@given(sl2())
def test_nau_round_trip(m):
    assume(abs(m.a) > 1e-3)
    assert mb.bruhat_nau(m).reconstruct().isclose(m, 1e-9 * max(1.0, np.abs(m.to_array()).max() ** 2))


@given(sl2(), st.floats(-2, 2))
def test_log_delta_under_flow(m, t):
    # a_t on both sides scales the (1,1) entry by e^t
    assume(abs(m.a) > 1e-3)
    got = mb.log_delta(mb.a_flow(t) @ m @ mb.a_flow(t))
    assert abs(got - (mb.log_delta(m) + 2 * t)) <= 1e-9 * max(1.0, abs(got))


@given(tangent, tangent)
def test_t1_symmetric(v, w):
    assert abs(mb.t1_distance(v, w) - mb.t1_distance(w, v)) <= 1e-9
    assert mb.t1_distance(v, v) <= 1e-12


@given(tangent, tangent)
def test_t1_dominates_base_distance(v, w):
    d = mb.hyperbolic_distance(v.basepoint, w.basepoint)
    assert d - 1e-9 <= mb.t1_distance(v, w) <= d + math.pi + 1e-9


@given(st.lists(st.tuples(coord, height, st.floats(-2, 2)), min_size=1, max_size=12), st.lists(st.tuples(coord, height), min_size=1, max_size=12))
def test_mcshane_is_lipschitz_and_maximal(samples, queries):
    pts = np.array([complex(x, y) for x, y, _ in samples])
    vals = np.array([v for *_, v in samples])
    # shrink values until the data are 1-Lipschitz
    D = lp.hyperbolic_metric(pts[:, None], pts[None, :])
    spread = np.abs(vals[:, None] - vals[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(spread > 0, D / spread, np.inf)
    vals = vals * min(1.0, float(ratio.min()))
    f = lp.PartialLipschitzFunction(pts, vals)
    q = np.array([complex(x, y) for x, y in queries])
    ext = lp.mcshane_extend(f, q)
    assert lp.lipschitz_margin(np.r_[pts, q], np.r_[vals, ext]) <= 1e-9
    assert np.all(lp.sup_extend(f, q) <= ext + 1e-9)


slack_edges = st.lists(
    st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(8, 32)),
    min_size=1,
    max_size=5,
)


@settings(deadline=None, max_examples=40)
@given(slack_edges)
def test_zset_subadditive(edges):
    names = ["a", "b", "c"]
    G = gr.build_graph(names, [(names[s], names[d], k / 16) for s, d, k in edges])
    B = 3.0
    for x, y, z in (("a", "a", "a"), ("a", "b", "c"), ("c", "b", "a")):
        zy = gr.enumerate_path_slacks(G, y, z, B / 2)
        xz = gr.enumerate_path_slacks(G, z, x, B / 2)
        xy = gr.enumerate_path_slacks(G, y, x, B)
        assert gr.check_subadditivity(zy, xz, xy) == []


@settings(deadline=None, max_examples=25)
@given(st.integers(20, 120), st.integers(1, 19), st.floats(-0.4, 0.4), st.integers(0, 10_000), st.integers(0, 10_000))
def test_rotation_cost_bounded_below(n, k, off, i, j):
    # away from half-grid offsets the sampled rotation is a grid shift, hence an
    # isometry, so chains cannot close a gap d for less than d - h
    s = cp.discretize({"kind": "rotation", "alpha": (k + off) / n}, n)
    x, y = i % n, j % n
    cost, _ = cp.interception_cost(s, x, y, 10)
    d = float(s.distance(x, y))
    assert cost >= d - s.h - 1e-12


@settings(deadline=None, max_examples=25)
@given(st.integers(20, 80), st.floats(0.01, 0.99), st.integers(0, 1000), st.integers(0, 1000))
def test_interception_cost_certificate_replays(n, alpha, i, j):
    s = cp.discretize({"kind": "rotation", "alpha": alpha}, n)
    cost, cert = cp.interception_cost(s, i % n, j % n, 8)
    total, terminal = cp.replay(s, cert)
    assert abs(total - cost) <= 1e-12 and terminal <= s.h + 1e-12
