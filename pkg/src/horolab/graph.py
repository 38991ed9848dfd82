"""Slack graph: budgeted path enumeration, shift sets, derived sets, ray thresholds and census."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import moebius as mb
from .errors import BudgetBlowup, BudgetMismatch, DanglingEdge, NegativeSlack
from .slack import CLAMP_TOL, twist_correction

DEDUP_TOL = 1e-12
FLAGS = ("imc", "infinite_leaf")


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    dst: str
    slack: Optional[float] = None
    family: Optional[dict] = None  # {base, correction_params: [x, y], c, k_min}
    nau: Optional[tuple] = None  # (n, t, u) when the edge comes from a matrix

    def values(self, tol: float = 1e-12, budget: float = math.inf, k_max: int = 10_000):
        """(label, slack) pairs; a family is expanded until its correction drops below tol."""
        if self.family is None:
            return [("", self.slack)]
        base = float(self.family["base"])
        x, y = self.family["correction_params"]
        c = float(self.family["c"])
        out = []
        for k in range(int(self.family.get("k_min", 0)), k_max):
            corr = twist_correction(x, y, k * c)
            if base + corr <= budget:
                out.append((f"[{k}]", base + corr))
            if abs(corr) < tol:
                break
        return out

    def to_json(self):
        d = {"id": self.id, "src": self.src, "dst": self.dst}
        if self.family is not None:
            d["family"] = dict(self.family)
        else:
            d["slack"] = self.slack
        if self.nau is not None:
            d["nau"] = list(self.nau)
        return d


class SlackGraph:
    """Immutable directed graph with nonnegative slack weights."""

    def __init__(self, vertices, edges):
        self.vertices = tuple(vertices)
        self.edges = tuple(edges)
        self.flags = dict(self.vertices)
        self.index = {e.id: i for i, e in enumerate(self.edges)}

    @property
    def vertex_ids(self):
        return [v for v, _ in self.vertices]

    def edge(self, eid: str) -> Edge:
        return self.edges[self.index[eid]]

    def out_edges(self, v: str):
        return [e for e in self.edges if e.src == v]

    def min_slack(self) -> float:
        vals = [s for e in self.edges for _, s in e.values(1e-3)]
        return min(vals) if vals else math.inf

    def reversed(self) -> "SlackGraph":
        return SlackGraph(self.vertices, [Edge(e.id, e.dst, e.src, e.slack, e.family, e.nau) for e in self.edges])

    def without(self, flag: str) -> "SlackGraph":
        keep = [(v, f) for v, f in self.vertices if f != flag]
        ids = {v for v, _ in keep}
        return SlackGraph(keep, [e for e in self.edges if e.src in ids and e.dst in ids])

    def to_json(self):
        return {
            "vertices": [{"id": v, "flag": f} for v, f in self.vertices],
            "edges": [e.to_json() for e in self.edges],
        }


def build_graph(vertices, edges) -> SlackGraph:
    """Validate and freeze a graph from JSON-like vertex and edge records."""
    verts = []
    for v in vertices:
        vid, flag = (v["id"], v.get("flag", "imc")) if isinstance(v, dict) else (v if isinstance(v, tuple) else (v, "imc"))
        if flag not in FLAGS:
            raise ValueError(f"unknown vertex flag {flag!r}")
        verts.append((str(vid), flag))
    ids = [v for v, _ in verts]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate vertex ids")
    out = []
    for i, e in enumerate(edges):
        if isinstance(e, Edge):
            rec = e.to_json()
        elif isinstance(e, dict):
            rec = e
        else:
            src, dst, s = e
            rec = {"src": src, "dst": dst, "slack": s}
        eid = str(rec.get("id", f"e{i}"))
        src, dst = str(rec["src"]), str(rec["dst"])
        if src not in ids or dst not in ids:
            raise DanglingEdge(f"edge {eid} references a missing vertex")
        nau = tuple(rec["nau"]) if rec.get("nau") is not None else None
        if "family" in rec:
            fam = dict(rec["family"])
            if float(fam["base"]) < -CLAMP_TOL:
                raise NegativeSlack(f"family {eid} has negative base")
            out.append(Edge(eid, src, dst, None, fam, nau))
            continue
        s = float(rec["slack"])
        if s < -CLAMP_TOL:
            raise NegativeSlack(f"edge {eid} has slack {s}")
        out.append(Edge(eid, src, dst, max(s, 0.0), None, nau))
    if len({e.id for e in out}) != len(out):
        raise ValueError("duplicate edge ids")
    return SlackGraph(verts, out)


def graph_from_json(data: dict) -> SlackGraph:
    return build_graph(data["vertices"], data["edges"])


# --- path enumeration -------------------------------------------------------


@dataclass
class TruncatedZSet:
    source: str
    target: str
    budget: float
    tolerance: float
    values: list  # (slack, witness tuple of edge labels)
    lengths: list = field(default_factory=list)  # (min edges, max edges) per value
    ray_start: Optional[float] = None

    @property
    def slacks(self) -> np.ndarray:
        return np.array([v for v, _ in self.values])

    def at_least(self, n_edges: int) -> np.ndarray:
        return np.array([v for (v, _), (_, hi) in zip(self.values, self.lengths) if hi >= n_edges])

    def contains(self, t: float, tol: float = 1e-9) -> bool:
        if self.ray_start is not None and t >= self.ray_start - tol:
            return True
        s = self.slacks
        if len(s) == 0:
            return False
        i = np.searchsorted(s, t)
        return any(abs(s[j] - t) <= tol for j in (i - 1, i) if 0 <= j < len(s))

    def to_json(self):
        return {
            "source": self.source,
            "target": self.target,
            "budget": self.budget,
            "tolerance": self.tolerance,
            "values": [{"slack": v, "witness": list(w), "min_edges": a, "max_edges": b} for (v, w), (a, b) in zip(self.values, self.lengths)],
            "ray_start": self.ray_start,
        }

    def csv_rows(self):
        return [(v, a) for (v, _), (a, _) in zip(self.values, self.lengths)]


def _expanded_edges(G: SlackGraph, tol: float, budget: float):
    """Flatten family edges into labelled explicit edges, in graph order."""
    flat = []
    for e in G.edges:
        for suffix, s in e.values(tol, budget):
            if s <= budget + DEDUP_TOL:
                flat.append((e.id + suffix, e.src, e.dst, s))
    return flat


def _merge(values, keys, tol=DEDUP_TOL):
    """Group sorted values within tol; return the index of the least key in each group."""
    order = np.lexsort((keys, values))
    v = values[order]
    starts = np.concatenate([[0], np.nonzero(np.diff(v) > tol)[0] + 1])
    picks = []
    for a, b in zip(starts, np.concatenate([starts[1:], [len(v)]])):
        grp = order[a:b]
        picks.append(grp[np.argmin(keys[grp])])
    return np.array(picks, dtype=int)


def enumerate_path_slacks(G: SlackGraph, y: str, x: str, B: float, delta: Optional[float] = None, expand_tol: float = 1e-12, cap: int = 2_000_000, max_edges: Optional[int] = None) -> TruncatedZSet:
    """All slacks of edge paths from y to x that are at most B.

    Layer L holds the distinct (vertex, value) states reachable with exactly L
    edges; each keeps the shortlex-least witness via a back pointer.  The number
    of layers is bounded by B / delta.
    """
    for v in (x, y):
        if v not in G.flags:
            raise KeyError(v)
    flat = _expanded_edges(G, expand_tol, B)
    if delta is None:
        delta = min((s for *_, s in flat), default=math.inf)
    if max_edges is None:
        if delta <= 0:
            raise ValueError("a positive lower bound on edge slacks is required")
        max_edges = int(math.floor(B / delta + 1e-9)) if math.isfinite(delta) else 0
    verts = G.vertex_ids
    vid = {v: i for i, v in enumerate(verts)}
    by_src = {}
    for j, (_, src, dst, s) in enumerate(flat):
        by_src.setdefault(vid[src], []).append(j)
    e_slack = np.array([s for *_, s in flat]) if flat else np.zeros(0)
    e_dst = np.array([vid[d] for _, _, d, _ in flat], dtype=int) if flat else np.zeros(0, int)
    out_sorted = {}
    for v, js in by_src.items():
        js = np.array(js, dtype=int)
        o = np.argsort(e_slack[js], kind="stable")
        out_sorted[v] = (js[o], e_slack[js[o]])
    # layer arrays: vertex, value, rank (lex order of witness), parent, edge
    layers = [dict(vert=np.array([vid[y]]), val=np.array([0.0]), rank=np.array([0]), parent=np.array([-1]), edge=np.array([-1]))]
    total = 1
    for _ in range(max_edges):
        prev = layers[-1]
        cv, cval, cpar, cedge = [], [], [], []
        for v, (js, sl) in out_sorted.items():
            mask = prev["vert"] == v
            if not mask.any():
                continue
            idx = np.nonzero(mask)[0]
            room = B + DEDUP_TOL - prev["val"][idx]
            cnt = np.searchsorted(sl, room, side="right")
            if cnt.sum() == 0:
                continue
            par = np.repeat(idx, cnt)
            pos = np.concatenate([np.arange(k) for k in cnt])
            edges = js[pos]
            cv.append(e_dst[edges])
            cval.append(prev["val"][par] + e_slack[edges])
            cpar.append(par)
            cedge.append(edges)
        if not cv:
            break
        vert = np.concatenate(cv)
        val = np.concatenate(cval)
        par = np.concatenate(cpar)
        edge = np.concatenate(cedge)
        # witness lex key: (rank of parent, edge index)
        key = prev["rank"][par].astype(np.int64) * (len(flat) + 1) + edge
        keep = []
        for v in np.unique(vert):
            sel = np.nonzero(vert == v)[0]
            keep.append(sel[_merge(val[sel], key[sel])])
        keep = np.concatenate(keep)
        vert, val, par, edge, key = vert[keep], val[keep], par[keep], edge[keep], key[keep]
        rank = np.empty(len(keep), dtype=np.int64)
        rank[np.argsort(key, kind="stable")] = np.arange(len(keep))
        layers.append(dict(vert=vert, val=val, rank=rank, parent=par, edge=edge))
        total += len(keep)
        if total > cap:
            raise BudgetBlowup(f"more than {cap} path states below budget {B}")

    def witness(layer: int, i: int) -> tuple:
        out = []
        while layer > 0:
            out.append(flat[layers[layer]["edge"][i]][0])
            i = layers[layer]["parent"][i]
            layer -= 1
        return tuple(reversed(out))

    vals, wits, lens = [], [], []
    for L, lay in enumerate(layers):
        if L == 0 and x != y:
            continue
        sel = np.nonzero(lay["vert"] == vid[x])[0]
        for i in sel:
            vals.append(lay["val"][i])
            wits.append((L, i))
            lens.append(L)
    values, lengths = [], []
    if vals:
        arr = np.array(vals)
        order = np.argsort(arr, kind="stable")
        groups = []
        for i in order:
            if groups and arr[i] - arr[groups[-1][0]] <= DEDUP_TOL:
                groups[-1].append(i)
            else:
                groups.append([i])
        for g in groups:
            # shortlex: fewest edges first, then lex rank inside that layer
            best = min(g, key=lambda i: (lens[i], layers[wits[i][0]]["rank"][wits[i][1]]))
            values.append((float(arr[best]), witness(*wits[best])))
            lengths.append((min(lens[i] for i in g), max(lens[i] for i in g)))
    return TruncatedZSet(y, x, B, DEDUP_TOL, values, lengths)


def path_slack(G: SlackGraph, witness: Sequence[str]) -> float:
    """Re-evaluate a witness made of edge ids, with [k] suffixes for family members."""
    total = 0.0
    for label in witness:
        if label.endswith("]"):
            eid, k = label[:-1].split("[")
            e = G.edge(eid)
            x, y = e.family["correction_params"]
            total += float(e.family["base"]) + twist_correction(x, y, int(k) * float(e.family["c"]))
        else:
            total += G.edge(label).slack
    return total


def witness_is_path(G: SlackGraph, witness: Sequence[str], y: str, x: str) -> bool:
    cur = y
    for label in witness:
        e = G.edge(label.split("[")[0])
        if e.src != cur:
            return False
        cur = e.dst
    return cur == x


# --- derived sets -----------------------------------------------------------


def derived_set(values, h: float) -> np.ndarray:
    """Points whose nearest distinct neighbour lies within h."""
    s = np.unique(np.asarray(values, dtype=float))
    if len(s) < 2:
        return s[:0]
    gaps = np.diff(s)
    left = np.concatenate([[np.inf], gaps])
    right = np.concatenate([gaps, [np.inf]])
    return s[np.minimum(left, right) <= h]


def derived_sets(values, h: float, max_level: int) -> list:
    """Iterates of derived_set; note the single-scale operator is idempotent."""
    out, cur = [], np.unique(np.asarray(values, dtype=float))
    for _ in range(max_level):
        cur = derived_set(cur, h)
        out.append(cur)
    return out


def _has_partner(x: np.ndarray, finer: np.ndarray, tol: float, h: float) -> np.ndarray:
    """For each x, is there y in finer with tol < |x - y| <= h?"""
    if len(finer) == 0:
        return np.zeros(len(x), bool)
    lo = np.searchsorted(finer, x - h, side="left")
    lo_in = np.searchsorted(finer, x - tol, side="left")
    hi_in = np.searchsorted(finer, x + tol, side="right")
    hi = np.searchsorted(finer, x + h, side="right")
    return ((lo_in - lo) > 0) | ((hi - hi_in) > 0)


def derived_ladder(ladder: Sequence, hs: Sequence[float], tols: Sequence[float], max_level: int) -> list:
    """Multi-resolution derived sets of the coarsest truncation.

    ladder[j] is the j-th truncation (finer for larger j).  A point of level
    i - 1 of truncation j survives to level i when level i - 1 of truncation
    j + 1 has a point at distance in (tols[j], hs[j]], where hs[j] and tols[j]
    belong to truncation j + 1.  Returns [D^1, ..., D^max_level] of ladder[0];
    levels beyond len(ladder) - 1 cannot be resolved and are returned empty.
    """
    cur = [np.unique(np.asarray(s, dtype=float)) for s in ladder]
    out = []
    for _ in range(max_level):
        nxt = []
        for j in range(len(cur) - 1):
            keep = _has_partner(cur[j], cur[j + 1], tols[j], hs[j])
            nxt.append(cur[j][keep])
        if not nxt:
            out.append(np.zeros(0))
            cur = []
            continue
        out.append(nxt[0])
        cur = nxt
    return out


def hausdorff_1d(a, b) -> float:
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return math.inf

    def directed(p, q):
        i = np.clip(np.searchsorted(q, p), 1, len(q) - 1) if len(q) > 1 else np.zeros(len(p), int)
        d = np.abs(p - q[i])
        if len(q) > 1:
            d = np.minimum(d, np.abs(p - q[i - 1]))
        return float(d.max())

    return max(directed(a, b), directed(b, a))


def _windowed_hausdorff(a, b, top: float, slack: float) -> float:
    """Hausdorff distance of a and b on [0, top], letting partners sit up to top + slack."""
    a, b = np.asarray(a), np.asarray(b)
    aa, bb = a[a <= top], b[b <= top]
    if len(aa) == 0 and len(bb) == 0:
        return 0.0
    d = 0.0
    for p, q in ((aa, b[b <= top + slack]), (bb, a[a <= top + slack])):
        if len(p) == 0:
            continue
        if len(q) == 0:
            return math.inf
        qs = np.sort(q)
        i = np.searchsorted(qs, p)
        dist = np.full(len(p), np.inf)
        m = i < len(qs)
        dist[m] = np.abs(qs[i[m]] - p[m])
        m = i > 0
        dist[m] = np.minimum(dist[m], np.abs(p[m] - qs[i[m] - 1]))
        d = max(d, float(dist.max()))
    return d


# --- twist closure graphs ---------------------------------------------------


@dataclass(frozen=True)
class Primitive:
    id: str
    src: str
    dst: str
    n_param: float
    t: float
    u_param: float

    def matrix(self) -> np.ndarray:
        return mb.n_elem(self.n_param).to_array() @ mb.a_flow(self.t).to_array() @ mb.u_elem(self.u_param).to_array()


def composite_slack(prims: Sequence[Primitive], ks: Sequence[int], c: dict) -> float:
    """Slack of p_1 a^{k_1} p_2 ... p_r: later edges multiply on the left."""
    m = prims[0].matrix()
    shift = 0.0
    for p, k in zip(prims[1:], ks):
        T = k * c[p.src]
        m = p.matrix() @ np.diag([math.exp(T / 2), math.exp(-T / 2)]) @ m
        shift += T
    return 2.0 * math.log(abs(m[0, 0])) - shift


def twist_closure_graph(vertices, primitives: Sequence[Primitive], c: dict, B: float, tol: float, k_min: int = 1, cap: int = 500_000, law: str = "additive") -> SlackGraph:
    """Graph whose edges are all twisted composites of the primitives with slack at most B.

    The twist exponent at each junction runs from k_min until the junction
    correction 2 ln(1 + e^{-kc} u n) drops below tol.  With law="additive" a
    composite's slack is the sum of primitive slacks and junction corrections,
    the closed form of a family edge; law="matrix" uses the exact product,
    whose second-order cross terms split permuted twist patterns by tiny gaps.
    """
    if law not in ("additive", "matrix"):
        raise ValueError(law)
    by_src = {}
    for p in primitives:
        by_src.setdefault(p.src, []).append(p)
    edges = []

    def kmax(left: Primitive, right: Primitive) -> int:
        k = k_min
        while twist_correction(left.u_param, right.n_param, k * c[right.src]) >= tol:
            k += 1
        return k - 1

    def grow(prims, ks, base, m, shift):
        if law == "matrix":
            s = 2.0 * math.log(abs(m[0, 0])) - shift
        else:
            s = base + sum(twist_correction(a.u_param, b.n_param, k * c[b.src]) for a, b, k in zip(prims, prims[1:], ks))
        if s <= B:
            label = prims[0].id + "".join(f"~{k}~{p.id}" for p, k in zip(prims[1:], ks))
            edges.append(Edge(label, prims[0].src, prims[-1].dst, s))
            if len(edges) > cap:
                raise BudgetBlowup(f"more than {cap} composite edges")
        for p in by_src.get(prims[-1].dst, []):
            if base + p.t > B:
                continue
            pm = mats[p.id]
            for k in range(k_min, kmax(prims[-1], p) + 1):
                T = k * c[p.src]
                step = pm * np.array([math.exp(T / 2), math.exp(-T / 2)])
                grow(prims + [p], ks + [k], base + p.t, step @ m, shift + T)

    mats = {p.id: p.matrix() for p in primitives}
    for p in primitives:
        if p.t <= B:
            grow([p], [], p.t, mats[p.id], 0.0)
    edges.sort(key=lambda e: e.id)
    return SlackGraph([(v, "imc") for v in vertices], edges)


@dataclass
class LevelVerdict:
    level: int
    derived: list
    hom: list
    hausdorff: float
    ok: bool

    def to_json(self):
        return {"level": self.level, "derived": self.derived, "hom": self.hom, "hausdorff": self.hausdorff, "ok": self.ok}


@dataclass
class DepthReport:
    h: float
    budget: float
    margin: float
    levels: list  # LevelVerdict per i

    @property
    def depth(self) -> int:
        """Number of leading nonempty levels of the derived ladder, plus one."""
        d = 1
        for lv in self.levels:
            if len(lv.derived) == 0:
                break
            d += 1
        return d

    @property
    def ok(self) -> bool:
        return all(lv.ok for lv in self.levels)

    def to_json(self):
        return {"h": self.h, "budget": self.budget, "margin": self.margin, "depth": self.depth, "ok": self.ok, "levels": [lv.to_json() for lv in self.levels]}


@dataclass
class LadderSchedule:
    """Resolution schedule of the multi-scale derived sets.

    h_j = h r^(j-1) for j >= 1, the distinctness tolerance of truncation j is
    theta h_j, and the coarsest truncation keeps corrections above tau0 h.
    """

    h: float
    ratio: float = 0.08
    theta: float = 0.11
    tau0: float = 1.5

    @classmethod
    def for_ratio(cls, h: float, q: float) -> "LadderSchedule":
        """Schedule for corrections decaying by the factor q per twist.

        theta < q puts one twist of every family in each window (theta h, h];
        ratio < theta (1 - q) and tau0 > 1 / (1 - q) keep consecutive twists of
        a coarser truncation from looking accumulated at the next scale.
        """
        theta = q / 2
        return cls(h, ratio=theta * (1 - q) / 1.5, theta=theta, tau0=1.5 / (1 - q))

    def hs(self, n: int) -> list:
        return [self.h * self.ratio ** j for j in range(n)]

    def tols(self, n: int) -> list:
        return [self.theta * v for v in self.hs(n)]

    def expansion(self, n: int) -> list:
        """Expansion tolerance for truncations 0..n."""
        return [self.tau0 * self.h] + self.tols(n)


def check_filtration(make_graph: Callable, x: str, y: str, B: float, h: float, max_level: int = 4, margin: Optional[float] = None, schedule: Optional[LadderSchedule] = None, delta: Optional[float] = None) -> DepthReport:
    """Compare multi-scale derived sets of Z with slacks of paths with more edges.

    make_graph(tol) returns the graph truncated at expansion tolerance tol; a
    SlackGraph with family edges is accepted and expanded at tol.
    """
    if margin is None:
        margin = B / 10
    sched = schedule or LadderSchedule(h)
    if sched.h != h:
        sched = LadderSchedule(h, sched.ratio, sched.theta, sched.tau0)
    if isinstance(make_graph, SlackGraph):
        G0 = make_graph
        build = lambda tol: (G0, tol)
    else:
        build = lambda tol: (make_graph(tol), 0.0)
    ladder = []
    exp = sched.expansion(max_level)
    z0 = None
    for tol in exp:
        G, etol = build(tol)
        z = enumerate_path_slacks(G, y, x, B, delta=delta, expand_tol=etol if etol else 1e-12)
        if z0 is None:
            z0 = z
        ladder.append(z.slacks)
    derived = derived_ladder(ladder, sched.hs(max_level), sched.tols(max_level), max_level)
    top = B - margin
    levels = []
    for i in range(1, max_level + 1):
        hom = z0.at_least(i + 1)
        d = derived[i - 1]
        dist = _windowed_hausdorff(d, hom, top, h)
        levels.append(LevelVerdict(i, [float(v) for v in d[d <= top]], [float(v) for v in hom[hom <= top]], dist, dist <= h))
    return DepthReport(h, B, margin, levels)


def h_sweep(make_graph, x, y, B, h0, max_level=4, margin=None, schedule=None) -> list:
    return [check_filtration(make_graph, x, y, B, h, max_level, margin, schedule) for h in (h0 / 4, h0 / 2, h0)]


def sweep_stable(reports: Sequence[DepthReport]) -> bool:
    """Every verdict passes and coarser levels reappear at finer resolution.

    reports are ordered from fine to coarse h; a coarser truncation is a subset
    of a finer one, so each coarse level set must lie within h of the next
    finer level set.
    """
    if not all(r.ok for r in reports):
        return False
    for fine, coarse in zip(reports, reports[1:]):
        top = coarse.budget - coarse.margin
        for a, b in zip(fine.levels, coarse.levels):
            if len(b.derived) == 0:
                continue
            cand = np.asarray(a.derived)
            if len(cand) == 0:
                return False
            d = np.min(np.abs(np.asarray(b.derived)[:, None] - cand[None, :]), axis=1)
            if d.max() > coarse.h:
                return False
    return True


def hom_levels(z: TruncatedZSet, max_level: int, top: float) -> list:
    """Slacks of paths with at least i + 1 edges, i = 1..max_level, cut at top."""
    out = []
    for i in range(1, max_level + 1):
        v = z.at_least(i + 1)
        out.append(v[v <= top])
    return out


# --- semigroup and ray checks -----------------------------------------------


def check_subadditivity(Zzy: TruncatedZSet, Zxz: TruncatedZSet, Zxy: TruncatedZSet, tol: float = 1e-9) -> list:
    """Sums a + b (a in Zzy, b in Zxz) within the budget of Zxy that are missing from Zxy."""
    if Zzy.budget + Zxz.budget > Zxy.budget + 1e-12:
        raise BudgetMismatch("B_zy + B_xz exceeds B_xy")
    target = Zxy.slacks
    a, b = Zzy.slacks, Zxz.slacks
    if len(a) == 0 or len(b) == 0:
        return []
    sums = (a[:, None] + b[None, :]).ravel()
    sums = sums[sums <= Zxy.budget]
    if len(target) == 0:
        return sorted(set(sums.tolist()))
    i = np.clip(np.searchsorted(target, sums), 0, len(target) - 1)
    d = np.abs(target[i] - sums)
    j = np.clip(i - 1, 0, len(target) - 1)
    d = np.minimum(d, np.abs(target[j] - sums))
    return sorted(set(sums[d > tol].tolist()))


def _dijkstra(G: SlackGraph, start: str, reverse: bool = False) -> dict:
    dist = {start: 0.0}
    heap = [(0.0, start)]
    adj = {}
    for e in G.edges:
        a, b = (e.dst, e.src) if reverse else (e.src, e.dst)
        s = e.slack if e.family is None else min(v for _, v in e.values(1e-12))
        adj.setdefault(a, []).append((b, s))
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist.get(v, math.inf):
            continue
        for w, s in adj.get(v, []):
            nd = d + s
            if nd < dist.get(w, math.inf):
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def ray_threshold(G: SlackGraph, x_j: str, x_i: str, budget: float = 10.0):
    """rho = least slack of a path from x_j to x_i through an infinite-leaf vertex.

    An infinite-leaf vertex carries the whole ray [0, inf) of loops, so every
    value past rho is attained; the assembled set keeps the slacks of paths
    avoiding such vertices below rho.
    """
    leaves = [v for v, f in G.vertices if f == "infinite_leaf"]
    fwd = _dijkstra(G, x_j)
    bwd = _dijkstra(G, x_i, reverse=True)
    rho = min((fwd.get(w, math.inf) + bwd.get(w, math.inf) for w in leaves), default=math.inf)
    if x_j in leaves or x_i in leaves:
        sub_vals = []
    else:
        sub = G.without("infinite_leaf")
        cap = min(rho, budget)
        z = enumerate_path_slacks(sub, x_j, x_i, cap) if sub.edges or x_i == x_j else TruncatedZSet(x_j, x_i, cap, DEDUP_TOL, [], [])
        sub_vals = [(v, w, l) for (v, w), l in zip(z.values, z.lengths) if v < rho - DEDUP_TOL]
    vals = [(v, w) for v, w, _ in sub_vals]
    lens = [l for *_, l in sub_vals]
    return rho, TruncatedZSet(x_j, x_i, min(rho, budget), DEDUP_TOL, vals, lens, None if math.isinf(rho) else rho)


# --- census ------------------------------------------------------------------


@dataclass(frozen=True)
class MarkedBusemannLabel:
    beta: float
    vertex: str


@dataclass
class CensusReport:
    classes: list  # ("+", v) / ("-", v) / ("dense", None)
    reversal_ok: dict
    zsets: dict

    @property
    def count(self) -> int:
        return len(self.classes)

    def member(self, label: MarkedBusemannLabel, x_i: str, tol: float = 1e-9) -> bool:
        """A point labelled (T, x_j) lies in the closure of N x_i iff T is in Z_{x_i, x_j}."""
        return self.zsets[(x_i, label.vertex)].contains(label.beta, tol)

    def to_json(self):
        return {
            "count": self.count,
            "classes": [[s, v] for s, v in self.classes],
            "reversal_ok": self.reversal_ok,
        }


def census(G: SlackGraph, budget: float = 5.0) -> CensusReport:
    classes = [("+", v) for v in G.vertex_ids] + [("-", v) for v in G.vertex_ids] + [("dense", None)]
    R = G.reversed()
    rev_ok, zsets = {}, {}
    for xi in G.vertex_ids:
        for xj in G.vertex_ids:
            rho, z = ray_threshold(G, xj, xi, budget)
            zsets[(xi, xj)] = z
        a = zsets[(xi, xi)]
        _, b = ray_threshold(R, xi, xi, budget)
        same = len(a.values) == len(b.values) and np.allclose(a.slacks, b.slacks, atol=1e-12, rtol=0) and a.ray_start == b.ray_start
        rev_ok[xi] = bool(same)
    return CensusReport(classes, rev_ok, zsets)
