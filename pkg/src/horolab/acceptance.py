"""Acceptance checks shared by the test suite and `horolab verify-all`.

Each check returns a CheckResult whose details are deterministic for a fixed
config; wall-clock time is measured separately and never written to artifacts.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import chainprox as cp
from . import cover
from . import graph as gr
from . import lipschitz as lp
from . import moebius as mb
from . import slack as sl
from .io import ExperimentConfig, GoldenRegistry


@dataclass
class CheckResult:
    id: int
    name: str
    passed: bool
    details: dict
    limit: float = math.inf
    runtime: float = 0.0

    @property
    def in_time(self) -> bool:
        return self.runtime < self.limit

    @property
    def ok(self) -> bool:
        return self.passed and self.in_time

    def line(self) -> str:
        verdict = "PASS" if self.ok else "FAIL"
        extra = "" if self.in_time else f" (over {self.limit:g} s)"
        return f"[{verdict}] {self.id:2d} {self.name}: {self.runtime:.2f} s{extra}"

    def to_json(self):
        # runtime is excluded so artifacts stay byte-identical across runs
        return {"id": self.id, "name": self.name, "passed": self.passed, "limit_s": self.limit, "details": self.details}


@dataclass
class Check:
    id: int
    name: str
    limit: float
    fn: Callable = field(repr=False)

    def run(self, cfg: ExperimentConfig) -> CheckResult:
        t0 = time.perf_counter()
        passed, details = self.fn(cfg)
        res = CheckResult(self.id, self.name, bool(passed), details, self.limit)
        res.runtime = time.perf_counter() - t0
        return res


def _golden() -> GoldenRegistry:
    return GoldenRegistry.load()


def _bundle():
    spec = cover.load_shipped_bundle()
    return spec, cover.build_vertices(spec)


# --- 1, 2: group conventions ---------------------------------------------------


def bruhat_suite(cfg, count: int = 10_000):
    rng = np.random.default_rng(cfg.seed)
    n = rng.uniform(-3, 3, count)
    t = rng.uniform(-6, 6, count)
    u = rng.uniform(-3, 3, count)
    worst, delta_gap = 0.0, 0.0
    for i in range(count):
        m = mb.n_elem(n[i]) @ mb.a_flow(t[i]) @ mb.u_elem(u[i])
        dec = mb.bruhat_nau(m)
        worst = max(worst, mb.frobenius(m, dec.reconstruct()))
        delta_gap = max(delta_gap, abs(mb.log_delta(m) - 2.0 * math.log(abs(m.a))))
    ok = worst < 1e-9 and delta_gap == 0.0
    return ok, {"count": count, "max_frobenius": worst, "max_log_delta_gap": delta_gap}


def convention_selftest(cfg, samples: int = 20, s: float = 1e-3, t: float = 5.0):
    rng = np.random.default_rng(cfg.seed + 1)
    worst_n, least_u = 0.0, math.inf
    for _ in range(samples):
        g = mb.n_elem(rng.uniform(-1, 1)) @ mb.a_flow(rng.uniform(-2, 2)) @ mb.u_elem(rng.uniform(-1, 1))
        v = mb.tangent_of(g)
        for kind, p in (("n", mb.n_elem(s)), ("u", mb.u_elem(s))):
            w = mb.tangent_of(p @ g)
            d0 = mb.t1_distance(v, w)
            d1 = mb.t1_distance(mb.flow(t, v), mb.flow(t, w))
            if kind == "n":
                worst_n = max(worst_n, d1 / d0)
            else:
                least_u = min(least_u, d1 / d0)
    ok = worst_n < 1e-2 and least_u > 10.0
    return ok, {"lower_ratio_max": worst_n, "upper_ratio_min": least_u, "flow_time": t, "perturbation": s}


# --- 3, 4, 5: slack engine -------------------------------------------------------


def slack_cross_oracle(cfg, max_len: int = 4, slack_cap: float = 3.2, tol: float = 1e-3):
    spec, vs = _bundle()
    by_name = {v.name: v for v in vs}
    cands, skipped = cover.enumerate_connectors(spec, vs, max_len, slack_cap)
    diffs = []
    for cc in cands:
        geo = sl.connector_geometric_slack(spec, by_name[cc.target_vertex], by_name[cc.source_vertex], cc)
        diffs.append(abs(geo.value - cc.raw_slack))
    worst = max(diffs) if diffs else math.inf
    smallest = sorted(c.raw_slack for c in cands)[:5]
    ok = len(cands) >= 20 and worst < tol and _pinned(_golden(), cfg, "bundle_smallest_slacks", smallest)
    return ok, {"connectors": len(cands), "skipped_words": skipped, "max_difference": worst, "smallest_slacks": smallest}


MODEL_FAMILIES = [
    (0.5, 1.0, 1.5, 0.3),
    (-0.7, 0.4, 2.0, 1.0),
    (1.3, -0.2, 1.2, 0.0),
    (0.9, 0.8, 2.4484524476780782, 0.5),
    (2.0, 1.5, 1.0, 0.2),
]


def twist_families(cfg, k_max: int = 30):
    fams = [sl.model_family(x, y, c, base, (0, k_max)) for x, y, c, base in MODEL_FAMILIES]
    spec, vs = _bundle()
    x = vs[0]
    cands, _ = cover.enumerate_connectors(spec, vs, 3, 3.2)
    F = x.base_lift
    for i, j in ((0, 1), (2, 5)):
        fams.append(sl.twist_family(F, cands[i].matrix, F, x.matrix, (0, k_max), v_in=cands[j].matrix, g_s=F, edge_id=f"bundle({i},{j})"))
    rows = []
    worst = 0.0
    for f in fams:
        start = f.threshold if f.threshold is not None else f.k_range[0]
        res = [abs(v) for k, v in f.residuals.items() if k >= start]
        w = max(res) if res else math.inf
        worst = max(worst, w)
        rows.append({"family": f.edge_id, "threshold": f.threshold, "limit": f.forward_limit, "x": f.u_param, "y": f.n_param, "max_residual": w})
    ok = len(fams) >= 5 and worst < 1e-8
    return ok, {"families": rows, "max_residual": worst}


def _pinned(reg: GoldenRegistry, cfg, name: str, observed) -> bool:
    """Golden comparison; values pinned under another config are not comparable."""
    if cfg.hash != reg.config_hash:
        return True
    return reg.matches(name, observed, cfg.hash)


def chain_harness(cfg, trials: int = 1000):
    kappa, haus, reports = sl.chain_suite(cfg.seed, trials)
    reg = _golden()
    finite = math.isfinite(kappa) and math.isfinite(haus)
    ok = finite and _pinned(reg, cfg, "kappa_hat", kappa) and _pinned(reg, cfg, "hausdorff_hat", haus)
    return ok, {
        "trials": trials,
        "kappa_hat": kappa,
        "hausdorff_hat": haus,
        "golden_kappa": reg.value("kappa_hat"),
        "golden_hausdorff": reg.value("hausdorff_hat"),
        "golden_applicable": cfg.hash == reg.config_hash,
    }


# --- 6..11: slack graph ---------------------------------------------------------


def brute_force_slacks(G: gr.SlackGraph, src: str, dst: str, B: float) -> list:
    """Every concatenation of edges from src to dst with total slack <= B."""
    found = set()
    adj = {}
    for e in G.edges:
        adj.setdefault(e.src, []).append((e.slack, e.dst))

    def walk(v, total):
        if v == dst:
            found.add(total)
        for s, w in adj.get(v, []):
            if total + s <= B:
                walk(w, total + s)

    walk(src, 0.0)
    return sorted(found)


def random_graph(rng: np.random.Generator):
    nv = int(rng.integers(1, 4))
    names = [f"v{i}" for i in range(nv)]
    ne = int(rng.integers(1, 5))
    # dyadic slacks keep every path sum exact in floating point
    edges = [(names[rng.integers(nv)], names[rng.integers(nv)], float(rng.integers(8, 33)) / 16) for _ in range(ne)]
    G = gr.build_graph(names, edges)
    smin = min(s for *_, s in edges)
    B = float(min(20 * smin, 6.0))
    return G, names, B


def z_vs_brute_force(cfg, graphs: int = 10):
    rng = np.random.default_rng(cfg.seed + 6)
    rows, ok = [], True
    for g in range(graphs):
        G, names, B = random_graph(rng)
        for a in names:
            for b in names:
                z = gr.enumerate_path_slacks(G, a, b, B)
                ref = brute_force_slacks(G, a, b, B)
                same = z.slacks.tolist() == ref
                ok &= same
                rows.append({"graph": g, "from": a, "to": b, "budget": B, "count": len(ref), "equal": same})
    return ok, {"pairs": rows}


def _bundle_graph(max_len: int, cap: float):
    spec, vs = _bundle()
    cands, _ = cover.enumerate_connectors(spec, vs, max_len, cap)
    return gr.graph_from_json(cover.connector_graph_json(vs, cands))


def subadditivity(cfg, B: float = 3.2):
    G = _bundle_graph(4, B)
    ids = G.vertex_ids
    full = {(a, b): gr.enumerate_path_slacks(G, a, b, B) for a in ids for b in ids}
    half = {(a, b): gr.enumerate_path_slacks(G, a, b, B / 2) for a in ids for b in ids}
    violations = 0
    triples = 0
    for x in ids:
        for z in ids:
            for y in ids:
                # Z_zy holds paths y -> z, Z_xz paths z -> x; their sums are paths y -> x
                violations += len(gr.check_subadditivity(half[(y, z)], half[(z, x)], full[(y, x)]))
                triples += 1
    return violations == 0, {"triples": triples, "violations": violations, "budget": B, "edges": len(G.edges)}


def filtration_graphs():
    P = gr.Primitive
    loop = [P("b", "x", "y", 0.5, 1.0, 0.5), P("d", "y", "x", 0.5, 1.0, 0.5)]
    return {
        "one": (["v"], [P("p", "v", "v", 0.5, 1.0, 0.5)], {"v": 1.5}, 6.0, ("v", "v")),
        "c2": (["v"], [P("p", "v", "v", 0.7, 1.1, 0.7)], {"v": 2.0}, 6.5, ("v", "v")),
        "c2b": (["v"], [P("p", "v", "v", 0.9, 0.95, 0.4)], {"v": 2.2}, 5.6, ("v", "v")),
        "cyc-xx": (["x", "y"], loop, {"x": 1.5, "y": 1.5}, 6.0, ("x", "x")),
        "cyc-xy": (["x", "y"], loop, {"x": 1.5, "y": 1.5}, 6.0, ("y", "x")),
    }


def filtration(cfg, h0: float = 5e-3):
    rows, ok = [], True
    for name, (V, prims, c, B, (a, b)) in filtration_graphs().items():
        mk = lambda tol, V=V, prims=prims, c=c, B=B: gr.twist_closure_graph(V, prims, c, B, tol)
        reps = gr.h_sweep(mk, a, b, B, h0)
        stable = gr.sweep_stable(reps)
        ok &= stable
        rows.append({
            "graph": name,
            "budget": B,
            "stable": stable,
            "sweep": [{"h": r.h, "ok": r.ok, "depth": r.depth, "hausdorff": [lv.hausdorff for lv in r.levels]} for r in reps],
        })
    return ok, {"graphs": rows, "h0": h0}


def depth_growth(cfg, B: float = 3.6, levels: int = 4, trials: int = 500):
    spec, vs = _bundle()
    delta, kept = sl.excursion_calibration(spec, vs, 0.2, trials, cfg.seed)
    G = _bundle_graph(4, B)
    root = G.vertex_ids[0]
    z = gr.enumerate_path_slacks(G, root, root, B)
    lv = gr.hom_levels(z, levels, B - B / 10)
    mins = [float(v.min()) if len(v) else math.inf for v in lv]
    nonempty = all(len(v) > 0 for v in lv)
    grows = all(m >= delta * (i + 1) for i, m in enumerate(mins))
    reg = _golden()
    pinned = _pinned(reg, cfg, "delta_hat", delta) and (not nonempty or _pinned(reg, cfg, "bundle_level_minima", mins))
    return nonempty and grows and pinned, {"delta_hat": float(delta), "kept": kept, "level_minima": mins, "level_sizes": [len(v) for v in lv], "budget": B}


def ray_example():
    return gr.build_graph(
        [{"id": "x", "flag": "imc"}, {"id": "w", "flag": "infinite_leaf"}],
        [("x", "x", 1.0), ("x", "x", 1.3), ("x", "w", 0.7), ("w", "x", 0.9)],
    )


def ray_threshold_check(cfg, budget: float = 10.0):
    G = ray_example()
    rho, z = gr.ray_threshold(G, "x", "x", budget)
    # oracle: cheapest x -> w -> x route, and every avoiding loop below it
    through = min(s1 + s2 for e1 in G.edges if e1.dst == "w" for s1 in [e1.slack] for e2 in G.edges if e2.src == "w" for s2 in [e2.slack])
    sub = G.without("infinite_leaf")
    below = [v for v in brute_force_slacks(sub, "x", "x", through) if v < through]
    ok = rho == through == 1.6 and z.slacks.tolist() == below == [0.0, 1.0, 1.3] and z.ray_start == rho
    return ok, {"rho": rho, "values": z.slacks.tolist(), "oracle_rho": through, "oracle_values": below}


def census_graphs():
    return {
        1: gr.build_graph(["a"], [("a", "a", 1.0), ("a", "a", 1.7)]),
        2: gr.build_graph(["a", "b"], [("a", "b", 0.6), ("b", "a", 0.9), ("a", "a", 1.4)]),
        3: gr.build_graph(["a", "b", "c"], [("a", "b", 0.5), ("b", "c", 0.7), ("c", "a", 0.8), ("b", "b", 1.1)]),
    }


def census_check(cfg, budget: float = 5.0):
    rows, ok = [], True
    for nv, G in census_graphs().items():
        rep = gr.census(G, budget)
        good = rep.count == 2 * nv + 1 and all(rep.reversal_ok.values())
        ok &= good
        rows.append({"vertices": nv, "count": rep.count, "reversal_ok": rep.reversal_ok})
    return ok, {"graphs": rows}


# --- 12..14: chain proximality --------------------------------------------------


def rotation_check(cfg, n: int = 1000, M: int = 500, eps_class: float = 0.1):
    s = cp.discretize({"kind": "rotation", "alpha": math.sqrt(2) - 1}, n)
    costs = cp.cost_rows(s, np.arange(n), M)
    idx = np.arange(n)
    d = s.distance(idx[:, None], idx[None, :])
    gap = float((costs - (d - s.h)).min())
    below = costs < eps_class
    mutual = below & below.T
    part = cp.classify_from_matrix(mutual, below, eps_class, M, float(costs.max()))
    ok = gap >= -1e-12 and len(part.classes) == n
    return ok, {"n": n, "M": M, "h": s.h, "min_cost_minus_lower_bound": gap, "classes": len(part.classes), "expected_classes": n}


def doubling_laminar_check(cfg, n_doubling: int = 2**14, M: int = 20, n_laminar: int = 1000):
    dbl = cp.discretize({"kind": "doubling"}, n_doubling)
    p1 = cp.classify(dbl, 2.0**-9, M)
    lam = cp.discretize({"kind": "laminar", "components": 2}, n_laminar)
    p2 = cp.classify(lam, 3 * lam.h, 200)
    components = sorted(np.nonzero(lam.comp == c)[0].tolist() for c in np.unique(lam.comp))
    matches = sorted(sorted(c.tolist()) for c in p2.classes) == components
    reg = _golden()
    pinned = _pinned(reg, cfg, "doubling_classes", len(p1.classes)) and _pinned(reg, cfg, "laminar_classes", len(p2.classes))
    ok = p1.max_cost <= 2.0**-9 and len(p1.classes) == 1 and matches and not p2.asymmetric and pinned
    return ok, {
        "doubling": {"n": n_doubling, "M": M, "max_cost": p1.max_cost, "classes": len(p1.classes)},
        "laminar": {"n": n_laminar, "h": lam.h, "classes": len(p2.classes), "asymmetric_pairs": len(p2.asymmetric), "matches_components": bool(matches)},
    }


def chain_recurrence_check(cfg):
    per = cp.discretize({"kind": "rotation", "alpha": 0.125}, 1000)
    rows, ok = [], True
    for x in (0, 7, 500):
        found, chain = cp.chain_recurrent(per, x, 1.0, 1e-3)
        zero = found and all(j == 0.0 for _, _, j in chain)
        ok &= zero
        rows.append({"x": x, "found": found, "zero_jumps": zero})
    ab = cp.discretize({"kind": "absorbing"}, 2)  # the absorbing model fixes its own sample count
    gap = ab.params["gap"]
    below, _ = cp.chain_recurrent(ab, 0, 1.0, 0.5 * gap)
    ok &= not below
    return ok, {"periodic": rows, "absorbing_gap": gap, "absorbing_below_gap": below}


# --- 15: McShane ------------------------------------------------------------------


def mcshane_check(cfg, samples: int = 200, pairs: int = 10_000, alternatives: int = 100):
    rng = np.random.default_rng(cfg.seed + 15)
    pts = rng.uniform(-2, 2, samples) + 1j * np.exp(rng.uniform(-1, 1, samples))
    anchor = 0.3 + 1.2j
    vals = 0.8 * lp.hyperbolic_metric(pts, anchor) + rng.uniform(-0.05, 0.05, samples)
    f = lp.PartialLipschitzFunction(pts, vals)
    # shrink until the noisy data is 1-Lipschitz
    while not lp.check_lipschitz(f)[0]:
        f = lp.PartialLipschitzFunction(pts, f.values * 0.9)
    exact = float(np.max(np.abs(lp.mcshane_extend(f, pts) - f.values)))
    q1 = rng.uniform(-3, 3, pairs) + 1j * np.exp(rng.uniform(-1.5, 1.5, pairs))
    q2 = rng.uniform(-3, 3, pairs) + 1j * np.exp(rng.uniform(-1.5, 1.5, pairs))
    v1, v2 = lp.mcshane_extend(f, q1), lp.mcshane_extend(f, q2)
    lip = float(np.max(np.abs(v1 - v2) - lp.hyperbolic_metric(q1, q2)))
    qs = np.concatenate([q1[:500], q2[:500]])
    hi = lp.mcshane_extend(f, qs)
    dominated = all(np.all(lp.random_alternative(f, qs, rng) <= hi + 1e-12) for _ in range(alternatives))
    ok = exact == 0.0 and lip <= 1e-12 and dominated
    return ok, {"extension_error": exact, "lipschitz_excess": lip, "alternatives_dominated": dominated}


CHECKS = [
    Check(1, "bruhat round trip", 1.0, bruhat_suite),
    Check(2, "convention self-test", 1.0, convention_selftest),
    Check(3, "slack cross-oracle", 60.0, slack_cross_oracle),
    Check(4, "twist-family law", 10.0, twist_families),
    Check(5, "broken-geodesic harness", 120.0, chain_harness),
    Check(6, "Z enumeration vs brute force", 30.0, z_vs_brute_force),
    Check(7, "subadditivity", 60.0, subadditivity),
    Check(8, "filtration", 120.0, filtration),
    Check(9, "depth growth", 120.0, depth_growth),
    Check(10, "ray threshold", 1.0, ray_threshold_check),
    Check(11, "census", 10.0, census_check),
    Check(12, "chain proximality: rotation", 60.0, rotation_check),
    Check(13, "chain proximality: doubling and laminar", 120.0, doubling_laminar_check),
    Check(14, "chain recurrence", 10.0, chain_recurrence_check),
    Check(15, "McShane extension", 10.0, mcshane_check),
]


def get_check(i: int) -> Check:
    for c in CHECKS:
        if c.id == i:
            return c
    raise KeyError(i)
