import math

import numpy as np
import pytest

from horolab import moebius as mb
from horolab.errors import DomainError, NearSingular, NotDecomposable, NotHyperbolic


def _tuple(m):
    return tuple(round(v, 12) + 0.0 for v in m.as_tuple())


@pytest.mark.parametrize(
    "raw, expected",
    [
        ([[2, 0], [0, 2]], (1.0, 0.0, 0.0, 1.0)),
        ([[-1, 0], [0, -1]], (1.0, 0.0, 0.0, 1.0)),
        ([[0, -3], [3, 0]], (0.0, 1.0, -1.0, 0.0)),
    ],
)
def test_normalize_examples(raw, expected):
    assert _tuple(mb.normalize(raw)) == expected


def test_normalize_sign_rule_on_b():
    # [[0,-1],[1,0]] and [[0,1],[-1,0]] are the same element; b carries the sign
    m = mb.normalize([[0, -3], [3, 0]])
    assert m.a == 0.0 and m.b > 0


def test_normalize_rejects_singular_and_reversing():
    with pytest.raises(NearSingular):
        mb.normalize([[1, 2], [2, 4]])
    with pytest.raises(NearSingular):
        mb.normalize([[1, 0], [0, -1]])


def test_normalize_idempotent():
    m = mb.normalize([[3, 1], [2, 5]])
    assert mb.normalize(m) == m


def test_distance_examples():
    assert mb.hyperbolic_distance(1j, 2j) == pytest.approx(math.log(2), abs=1e-15)
    assert mb.hyperbolic_distance(1j, 1j) == 0.0
    assert mb.hyperbolic_distance(1j, 1 + 1j) == pytest.approx(math.acosh(1.5), abs=1e-14)


def test_distance_matches_arclength_integral():
    # the geodesic from i to 1+i is the circle |z - 1/2| = sqrt(5)/2
    r = math.sqrt(5) / 2
    a0 = math.atan2(1.0, -0.5)
    a1 = math.atan2(1.0, 0.5)
    th = np.linspace(a1, a0, 200_001)
    y = r * np.sin(th)
    ds = r * np.abs(np.diff(th))
    integral = float(np.sum(ds * 0.5 * (1 / y[1:] + 1 / y[:-1])))
    assert mb.hyperbolic_distance(1j, 1 + 1j) == pytest.approx(integral, abs=1e-9)


def test_distance_domain_error():
    with pytest.raises(DomainError):
        mb.hyperbolic_distance(1j, 2.0 + 0j)


@pytest.mark.parametrize("s", [-3.0, 0.0, 0.7, 5.0])
def test_bruhat_pure_a(s):
    d = mb.bruhat_nau(mb.a_flow(s))
    assert (d.n_param, d.u_param) == (0.0, 0.0)
    assert d.t == pytest.approx(s, abs=1e-14)


def test_bruhat_examples():
    d = mb.bruhat_nau(mb.normalize([[1, 0], [1, 1]]))
    assert (d.n_param, d.t, d.u_param) == (1.0, 0.0, 0.0)
    d = mb.bruhat_nau(mb.normalize([[1, 1], [1, 2]]))
    assert (d.n_param, d.t, d.u_param) == (1.0, 0.0, 1.0)


def test_bruhat_not_decomposable():
    with pytest.raises(NotDecomposable):
        mb.bruhat_nau(mb.normalize([[0, -1], [1, 0]]))


def test_log_delta_examples():
    assert mb.log_delta(mb.normalize([[2, 0], [0, 0.5]])) == pytest.approx(2 * math.log(2))
    assert mb.log_delta(mb.normalize([[1, 5], [0, 1]])) == 0.0
    m = mb.twist_product(math.log(2), 1.0, 1.0)
    assert mb.log_delta(m) == pytest.approx(2 * math.log(1.5), abs=1e-14)


def test_axis_diagonal():
    line, ell = mb.axis(mb.normalize([[2, 0], [0, 0.5]]))
    assert (line.xi_minus, line.xi_plus) == (0.0, math.inf)
    assert ell == pytest.approx(2 * math.log(2))


def test_axis_parabolic():
    with pytest.raises(NotHyperbolic):
        mb.axis(mb.normalize([[1, 0], [1, 1]]))


def test_axis_against_numpy_roots():
    m = mb.normalize([[2, 1], [1, 1]])
    line, ell = mb.axis(m)
    # fixed points solve c z^2 + (d - a) z - b = 0
    roots = sorted(np.roots([m.c, m.d - m.a, -m.b]).real)
    assert sorted([line.xi_minus, line.xi_plus]) == pytest.approx(roots, abs=1e-12)
    assert line.xi_plus == pytest.approx((1 + math.sqrt(5)) / 2)
    assert ell == pytest.approx(2 * math.acosh(1.5))
    # forward iteration converges to the attracting end
    z = 0.3 + 0.2j
    for _ in range(60):
        z = m(z)
    assert z.real == pytest.approx(line.xi_plus, abs=1e-9)


def test_t1_distance_examples():
    v = mb.UnitTangent(1j, 0.3)
    assert mb.t1_distance(v, v) == 0.0
    assert mb.t1_distance(mb.UnitTangent(1j, 0.0), mb.UnitTangent(1j, math.pi / 2)) == pytest.approx(math.pi / 2)
    up = math.pi / 2
    assert mb.t1_distance(mb.UnitTangent(1j, up), mb.UnitTangent(2j, up)) == pytest.approx(math.log(2), abs=1e-14)


def test_t1_distance_isometry_invariant():
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = mb.UnitTangent(complex(rng.uniform(-1, 1), rng.uniform(0.5, 2)), rng.uniform(-3, 3))
        w = mb.UnitTangent(complex(rng.uniform(-1, 1), rng.uniform(0.5, 2)), rng.uniform(-3, 3))
        g = mb.normalize([[rng.uniform(1, 2), rng.uniform(-1, 1)], [rng.uniform(-1, 1), rng.uniform(1, 2)]])
        d0 = mb.t1_distance(v, w)
        d1 = mb.t1_distance(mb.act_tangent(g, v), mb.act_tangent(g, w))
        assert d1 == pytest.approx(d0, abs=1e-9)


def test_flow_moves_along_geodesic():
    g = mb.normalize([[1.3, 0.2], [0.4, 0.83]])
    v = mb.tangent_of(g)
    for t in (0.5, 1.0, 3.0):
        w = mb.flow(t, v)
        assert mb.hyperbolic_distance(v.basepoint, w.basepoint) == pytest.approx(t, abs=1e-9)


def test_element_tangent_roundtrip():
    g = mb.normalize([[1.3, 0.2], [0.4, 0.83]])
    assert mb.element_of(mb.tangent_of(g)).isclose(g)


def test_stable_horocycle_contracts():
    g = mb.normalize([[1.1, 0.3], [-0.2, 0.85]])
    v = mb.tangent_of(g)
    vn = mb.tangent_of(mb.n_elem(1e-3) @ g)
    vu = mb.tangent_of(mb.u_elem(1e-3) @ g)
    d_n = [mb.t1_distance(mb.flow(t, v), mb.flow(t, vn)) for t in (0, 2, 4, 6)]
    d_u = [mb.t1_distance(mb.flow(t, v), mb.flow(t, vu)) for t in (0, 2, 4, 6)]
    assert all(a > b for a, b in zip(d_n, d_n[1:]))
    assert all(a < b for a, b in zip(d_u, d_u[1:]))
    assert d_n[-1] / d_n[0] < 1e-2
    assert d_u[-1] / d_u[0] > 10


def test_frame_of_line_sits_on_line():
    line = mb.GeodesicLine(-1.0, 2.0)
    v = mb.tangent_of(mb.frame_of_line(line, 0.4))
    assert v.basepoint == pytest.approx(mb.geodesic_point(line, 0.4), abs=1e-12)
    ahead = mb.flow(1.0, v).basepoint
    assert ahead == pytest.approx(mb.geodesic_point(line, 1.4), abs=1e-9)


def test_line_json_roundtrip():
    line = mb.GeodesicLine(math.inf, 0.5)
    assert mb.GeodesicLine.from_json(line.to_json()) == line
