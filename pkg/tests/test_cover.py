import json
import math

import numpy as np
import pytest

from horolab import cover
from horolab import moebius as mb
from horolab.errors import BudgetExceeded, NonPositiveDegree, NotHyperbolic


@pytest.fixture(scope="module")
def bundle():
    spec = cover.load_shipped_bundle()
    return spec, cover.build_vertices(spec)


def two_gen(phi=None, c=2 * math.log(2)):
    gens = {"g1": mb.normalize([[2, 0], [0, 0.5]]), "g2": mb.normalize([[1, 0], [1, 1]])}
    return cover.FuchsianCoverSpec(gens, phi or {"g1": 1, "g2": 0}, c)


def test_word_roundtrip():
    w = cover.parse_word("g0 g3 g1^-1")
    assert w == (("g0", 1), ("g3", 1), ("g1", -1))
    assert cover.format_word(w) == "g0 g3 g1^-1"
    assert cover.invert_word(w) == (("g1", 1), ("g3", -1), ("g0", -1))


def test_shipped_relator_residual(bundle):
    spec, _ = bundle
    rep = cover.validate_group(spec)
    assert rep.ok
    assert max(rep.residuals.values()) < 1e-7
    assert all(v == 0 for v in rep.phi_residuals.values())


def test_relator_total_degree_zero(bundle):
    spec, _ = bundle
    for rel in spec.relations:
        assert spec.degree(rel) == 0


def test_bogus_relation_flagged(bundle):
    spec, _ = bundle
    bad = cover.FuchsianCoverSpec(spec.generators, spec.phi, spec.c, [cover.parse_word("g0")])
    rep = cover.validate_group(bad)
    assert not rep.ok
    g0 = spec.generators["g0"]
    assert rep.residuals["g0"] == pytest.approx(mb.frobenius(g0, mb.identity()))


def test_enumeration_counts():
    spec = two_gen()
    words = [w for w, _, _ in cover.enumerate_words(spec, 1)]
    assert sorted(words) == sorted([(("g1", 1),), (("g1", -1),), (("g2", 1),), (("g2", -1),)])
    assert len(list(cover.enumerate_words(spec, 2))) == 16
    assert all(len(w) > 0 for w, _, _ in cover.enumerate_words(spec, 3))


def test_enumeration_is_reduced_and_shortlex():
    spec = two_gen()
    words = [w for w, _, _ in cover.enumerate_words(spec, 3)]
    assert len(words) == len(set(words)) == cover.word_count(2, 3)
    for w in words:
        for a, b in zip(w, w[1:]):
            assert not (a[0] == b[0] and a[1] == -b[1])
    assert [len(w) for w in words] == sorted(len(w) for w in words)


def test_enumeration_budget():
    with pytest.raises(BudgetExceeded):
        list(cover.enumerate_words(two_gen(), 30, cap=1000))


def test_enumerated_matrices_and_degrees(bundle):
    spec, _ = bundle
    for w, m, d in cover.enumerate_words(spec, 2):
        assert m.isclose(spec.evaluate(w))
        assert d == spec.degree(w)


def test_build_vertices_examples():
    spec = two_gen()
    (v,) = cover.build_vertices(spec, {"a": "g1"})
    assert v.length == pytest.approx(2 * math.log(2))
    assert v.degree == 1 and v.length_ok
    with pytest.raises(NonPositiveDegree):
        cover.build_vertices(two_gen({"g1": 1, "g2": 0}), {"b": "g1^-1 g1 g1^-1"})
    with pytest.raises(NotHyperbolic):
        cover.build_vertices(spec, {"p": "g2"})


def test_zero_degree_vertex_rejected():
    spec = two_gen({"g1": 0, "g2": 0})
    with pytest.raises(NonPositiveDegree):
        cover.build_vertices(spec, {"a": "g1"})


def test_shipped_vertex(bundle):
    spec, vs = bundle
    (x,) = vs
    assert x.degree == 2
    assert x.length == pytest.approx(2 * spec.c, abs=1e-9)
    assert x.length_ok
    # the base lift sits on the axis
    v = mb.tangent_of(x.base_lift)
    assert v.basepoint == pytest.approx(mb.geodesic_point(x.axis, 0.0), abs=1e-12)


def test_connector_slack_diagonal_case():
    # one vertex on (0, inf), connector word whose frame product is a_s
    spec = two_gen()
    (v,) = cover.build_vertices(spec, {"a": "g1"})
    s = cover.connector_slack(spec, v, v, (), mb.identity())
    assert s == pytest.approx(0.0, abs=1e-12)


def test_connectors_nonnegative_and_not_axes(bundle):
    spec, vs = bundle
    cands, skipped = cover.enumerate_connectors(spec, vs, 3, 3.2)
    assert cands and skipped == 0
    for cc in cands:
        assert cc.raw_slack >= -1e-9
        assert not cc.line.same_as(vs[0].axis)


def test_shipped_smallest_slacks(bundle):
    spec, vs = bundle
    cands, _ = cover.enumerate_connectors(spec, vs, 4, 3.2)
    s = sorted(c.raw_slack for c in cands)
    assert s[:4] == pytest.approx([0.5348] * 4, abs=1e-4)
    assert s[4] == pytest.approx(math.asinh(1.0), abs=1e-9)


def test_dedup_idempotent(bundle):
    spec, vs = bundle
    cands, _ = cover.enumerate_connectors(spec, vs, 3, 3.2)
    once = cover.dedup_connectors(cands, vs)
    assert once == cands
    assert cover.dedup_connectors(once, vs) == once


def test_graph_json_replicates_sheets(bundle):
    spec, vs = bundle
    cands, _ = cover.enumerate_connectors(spec, vs, 3, 3.2)
    g = cover.connector_graph_json(vs, cands)
    assert [v["id"] for v in g["vertices"]] == ["x#0", "x#1"]
    assert len(g["edges"]) == 2 * len(cands)
    json.dumps(g)


def test_compat_scan_on_one_axis():
    s = np.linspace(-3, 3, 61)
    pts = 1j * np.exp(s)
    rep = cover.compatibility_scan(pts, np.log(pts.imag))
    assert rep.count == 0
    assert rep.worst_margin == pytest.approx(0.0, abs=1e-12)


def test_compat_scan_detects_overlap():
    # two vertical lines at distance D apart at height 1; tau jumps by more than D
    p, q = 1j, 1 + 1j
    D = mb.hyperbolic_distance(p, q)
    rep = cover.compatibility_scan([p, q], [0.0, D + 0.5])
    assert rep.count == 1
    assert rep.violations[0][:2] == (1, 0)
    assert rep.violations[0][2] == pytest.approx(0.5)


def test_shipped_model_tau_compatible(bundle):
    spec, vs = bundle
    f, rep = cover.sample_model_tau(spec, vs, 3.0, 0.1, max_len=4)
    # regression value of the first run
    assert rep.count == 0
    assert rep.n_points == len(f.values) > 100


def test_spec_json_roundtrip(bundle, tmp_path):
    spec, _ = bundle
    p = tmp_path / "b.json"
    p.write_text(json.dumps(spec.to_json()))
    again = cover.load_spec(p)
    assert again.c == spec.c and again.phi == spec.phi
    for k in spec.generators:
        assert again.generators[k].isclose(spec.generators[k], 1e-12)
