"""Chain proximality on discretized systems: interception costs, classes and chain recurrence."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .errors import InvalidModel

INF = np.inf


@dataclass
class DiscretizedSystem:
    """Finite sample of a transversal with its first-return map.

    Points are laid out component by component.  Circle components are
    uniform grids (index order = cyclic order); points in different components
    are at the fixed distance `separation`.  A system with `dense` set carries
    an explicit distance matrix instead.
    """

    sigma: np.ndarray
    h: float
    model: str
    params: dict
    comp: np.ndarray
    spacing: np.ndarray  # per component
    starts: np.ndarray  # first index of each component
    sizes: np.ndarray
    separation: float = 1.0
    dense: Optional[np.ndarray] = None
    segment_lengths: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.sigma)

    def distance(self, i, j) -> np.ndarray:
        i = np.asarray(i)
        j = np.asarray(j)
        if self.dense is not None:
            return self.dense[i, j]
        ci, cj = self.comp[i], self.comp[j]
        a = i - self.starts[ci]
        b = j - self.starts[cj]
        size = self.sizes[ci]
        k = np.abs(a - b) % size
        within = np.minimum(k, size - k) * self.spacing[ci]
        return np.where(ci == cj, within, self.separation)

    def window(self) -> np.ndarray:
        """Per-component index radius of the closed h-ball."""
        return np.floor(self.h / self.spacing + 1e-9).astype(np.int64)

    def power(self, m: int) -> np.ndarray:
        out = np.arange(self.n)
        for _ in range(m):
            out = self.sigma[out]
        return out

    def check_metric(self, rng: np.random.Generator, samples: int = 2000, tol: float = 1e-12) -> bool:
        i, j, k = (rng.integers(0, self.n, samples) for _ in range(3))
        dij, djk, dik = self.distance(i, j), self.distance(j, k), self.distance(i, k)
        return bool(
            np.all(dij >= 0)
            and np.allclose(dij, self.distance(j, i))
            and np.all(dik <= dij + djk + tol)
            and np.all(self.distance(i, i) == 0)
        )

    def to_json(self):
        return {"model": self.model, "params": self.params, "n": self.n, "h": self.h}


def _circle_system(sigma, sizes, circumferences, model, params, separation=1.0):
    sizes = np.asarray(sizes, dtype=np.int64)
    spacing = np.asarray(circumferences, dtype=float) / sizes
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    comp = np.repeat(np.arange(len(sizes)), sizes)
    return DiscretizedSystem(np.asarray(sigma, dtype=np.int64), float(spacing.max()), model, params, comp, spacing, starts, sizes, separation)


def iet_map(x: np.ndarray, lengths, permutation) -> np.ndarray:
    """Interval exchange: interval j moves to slot permutation[j]."""
    lengths = np.asarray(lengths, dtype=float)
    left = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    order = np.argsort(permutation)
    new_left = np.empty_like(left)
    acc = 0.0
    for j in order:
        new_left[j] = acc
        acc += lengths[j]
    idx = np.clip(np.searchsorted(np.cumsum(lengths), x, side="right"), 0, len(lengths) - 1)
    return (x - left[idx] + new_left[idx]) % 1.0


def discretize(model: dict, n: int) -> DiscretizedSystem:
    """Sample a model system; sigma is the nearest-sample image of the true map."""
    if n < 2:
        raise InvalidModel("need at least two sample points")
    kind = model.get("kind")
    x = np.arange(n) / n
    if kind == "rotation":
        alpha = float(model["alpha"])
        sigma = np.rint((x + alpha) % 1.0 * n).astype(np.int64) % n
        return _circle_system(sigma, [n], [1.0], kind, {"alpha": alpha})
    if kind == "doubling":
        sigma = np.rint((2 * x) % 1.0 * n).astype(np.int64) % n
        return _circle_system(sigma, [n], [1.0], kind, {})
    if kind == "iet":
        lengths = np.asarray(model["lengths"], dtype=float)
        perm = list(model["permutation"])
        if np.any(lengths <= 0) or abs(lengths.sum() - 1.0) > 1e-12:
            raise InvalidModel("IET lengths must be positive and sum to 1")
        if sorted(perm) != list(range(len(lengths))):
            raise InvalidModel("permutation must be a bijection of interval labels")
        sigma = np.rint(iet_map(x, lengths, perm) * n).astype(np.int64) % n
        return _circle_system(sigma, [n], [1.0], kind, {"lengths": lengths.tolist(), "permutation": perm})
    if kind == "laminar":
        k = int(model.get("components", 2))
        rho = float(model.get("rho", 0.5))
        sep = float(model.get("separation", 0.3))
        circ = float(model.get("circumference", 0.5))
        if not 0 < rho < 1:
            raise InvalidModel("contraction rate must lie in (0, 1)")
        if circ / 2 > sep:
            raise InvalidModel("separation must exceed the within-component diameter")
        per = n // k
        if per < 2:
            raise InvalidModel("too few points per component")
        sigma = np.empty(per * k, dtype=np.int64)
        anchors = model.get("anchors", [0.0] * k)
        for c in range(k):
            pos = np.arange(per) / per * circ
            a = anchors[c] % circ
            off = (pos - a + circ / 2) % circ - circ / 2
            img = (a + rho * off) % circ
            sigma[c * per : (c + 1) * per] = c * per + np.rint(img / circ * per).astype(np.int64) % per
        params = {"components": k, "rho": rho, "separation": sep, "circumference": circ, "gaps": "forward"}
        return _circle_system(sigma, [per] * k, [circ] * k, kind, params, sep)
    if kind == "absorbing":
        gap = float(model.get("gap", 0.1))
        transient = int(model.get("transient", 10))
        period = int(model.get("period", 5))
        far = float(model.get("far", 10.0))
        coords = np.concatenate([np.arange(transient) * gap, far + np.arange(period) * gap / 2])
        sigma = np.concatenate([np.arange(1, transient + 1), transient + (np.arange(1, period + 1) % period)])
        return custom_system(coords, sigma, lambda a, b: np.abs(a - b), kind, {"gap": gap, "transient": transient, "period": period, "far": far})
    if kind == "custom":
        return custom_system(np.asarray(model["points"], dtype=float), np.asarray(model["sigma"]), lambda a, b: np.abs(a - b), kind, {})
    raise InvalidModel(f"unknown model {kind!r}")


def custom_system(coords, sigma, metric, model="custom", params=None, h=None, segment_lengths=None) -> DiscretizedSystem:
    coords = np.asarray(coords)
    sigma = np.asarray(sigma, dtype=np.int64)
    n = len(coords)
    if sigma.shape != (n,) or sigma.min() < 0 or sigma.max() >= n:
        raise InvalidModel("sigma must be a total map on indices")
    dense = metric(coords[:, None], coords[None, :]).astype(float)
    if h is None:
        off = dense + np.diag(np.full(n, np.inf))
        h = float(off.min(axis=1).max())
    sys_ = DiscretizedSystem(sigma, h, model, params or {}, np.zeros(n, np.int64), np.array([h]), np.array([0]), np.array([n]), dense=dense, segment_lengths=segment_lengths, coords=coords)
    return sys_


# --- layered shortest paths -------------------------------------------------


@numba.njit(cache=True)
def _circle_rows(sources, sigma, powers, comp, starts, sizes, spacing, radius, separation, M):
    n = sigma.shape[0]
    ncomp = sizes.shape[0]
    out = np.empty((sources.shape[0], n))
    D = np.empty(n)
    g = np.empty(n)
    W = np.empty(n)
    cmin = np.empty(ncomp)
    for row in range(sources.shape[0]):
        x = sources[row]
        for i in range(n):
            D[i] = np.inf
        D[x] = 0.0
        best = out[row]
        for m in range(M + 1):
            if m > 0:
                # free move: scatter-min through sigma
                for i in range(n):
                    g[i] = np.inf
                for w in range(n):
                    p = sigma[w]
                    if D[w] < g[p]:
                        g[p] = D[w]
                # jump: distance transform, circle by circle; the first lap of
                # each sweep only primes the running minimum across the wrap
                for c in range(ncomp):
                    s0 = starts[c]
                    e0 = s0 + sizes[c]
                    sp = spacing[c]
                    run = np.inf
                    for i in range(s0, e0):
                        run = min(run + sp, g[i])
                    for i in range(s0, e0):
                        run = min(run + sp, g[i])
                        D[i] = run
                    run = np.inf
                    for i in range(e0 - 1, s0 - 1, -1):
                        run = min(run + sp, g[i])
                    mn = np.inf
                    for i in range(e0 - 1, s0 - 1, -1):
                        run = min(run + sp, g[i])
                        if run < D[i]:
                            D[i] = run
                        if g[i] < mn:
                            mn = g[i]
                    cmin[c] = mn
                if ncomp > 1:
                    for c in range(ncomp):
                        other = np.inf
                        for c2 in range(ncomp):
                            if c2 != c and cmin[c2] < other:
                                other = cmin[c2]
                        other += separation
                        for i in range(starts[c], starts[c] + sizes[c]):
                            if other < D[i]:
                                D[i] = other
            # terminal: min of D over the h-ball around sigma^m(y)
            for i in range(n):
                W[i] = D[i]
            for c in range(ncomp):
                s0 = starts[c]
                L = sizes[c]
                for d in range(1, radius[c] + 1):
                    for a in range(L):
                        j1 = a + d
                        if j1 >= L:
                            j1 -= L
                        j2 = a - d
                        if j2 < 0:
                            j2 += L
                        v = min(D[s0 + j1], D[s0 + j2])
                        if v < W[s0 + a]:
                            W[s0 + a] = v
            top = 0.0
            for y in range(n):
                v = W[powers[m, y]]
                if m == 0 or v < best[y]:
                    best[y] = v
                if best[y] > top:
                    top = best[y]
            # costs are nonnegative, so a zero row is final
            if top <= 0.0:
                break
    return out


def _powers(sys: DiscretizedSystem, M: int) -> np.ndarray:
    P = np.empty((M + 1, sys.n), dtype=np.int64)
    P[0] = np.arange(sys.n)
    for m in range(1, M + 1):
        P[m] = sys.sigma[P[m - 1]]
    return P


def _dense_layers(sys: DiscretizedSystem, x: int, M: int, keep: bool = False):
    """Layered DP for one source on an explicit metric; optionally keeps argmins."""
    n = sys.n
    Dm = sys.dense
    within = Dm <= sys.h + 1e-12
    D = np.full(n, INF)
    D[x] = 0.0
    layers, parents = [D.copy()], []
    for _ in range(M):
        g = np.full(n, INF)
        arg_g = np.full(n, -1)
        order = np.lexsort((np.arange(n), D))[::-1]
        # later writes win, so iterate from worst to best with lowest index last
        g[sys.sigma[order]] = D[order]
        arg_g[sys.sigma[order]] = order
        tot = g[:, None] + Dm
        p = np.argmin(tot, axis=0)
        D = tot[p, np.arange(n)]
        layers.append(D.copy())
        if keep:
            parents.append((arg_g, p))
    return layers, parents, within


@numba.njit(cache=True)
def _circle_layers(x, sigma, comp, starts, sizes, spacing, separation, M):
    """Single-source layers with argmins: arg_g[m, p] is the preimage kept by the
    scatter, par[m, z] the point jumped from."""
    n = sigma.shape[0]
    ncomp = sizes.shape[0]
    layers = np.full((M + 1, n), np.inf)
    arg_g = np.full((M, n), -1, dtype=np.int64)
    par = np.full((M, n), -1, dtype=np.int64)
    layers[0, x] = 0.0
    g = np.empty(n)
    for m in range(M):
        D = layers[m]
        for i in range(n):
            g[i] = np.inf
        for w in range(n):
            p = sigma[w]
            if D[w] < g[p]:
                g[p] = D[w]
                arg_g[m, p] = w
        out = layers[m + 1]
        for c in range(ncomp):
            s0 = starts[c]
            L = sizes[c]
            sp = spacing[c]
            run = np.inf
            src = -1
            for t in range(2 * L):
                i = s0 + (t % L)
                run += sp
                if g[i] < run:
                    run = g[i]
                    src = i
                if t >= L:
                    out[i] = run
                    par[m, i] = src
            run = np.inf
            src = -1
            for t in range(2 * L - 1, -1, -1):
                i = s0 + (t % L)
                run += sp
                if g[i] < run:
                    run = g[i]
                    src = i
                if t < L and run < out[i]:
                    out[i] = run
                    par[m, i] = src
        if ncomp > 1:
            for c in range(ncomp):
                best = np.inf
                bi = -1
                for j in range(n):
                    if comp[j] != c and g[j] < best:
                        best = g[j]
                        bi = j
                best += separation
                for i in range(starts[c], starts[c] + sizes[c]):
                    if best < out[i]:
                        out[i] = best
                        par[m, i] = bi
    return layers, arg_g, par


def _circle_layers_single(sys: DiscretizedSystem, x: int, M: int):
    layers, arg_g, par = _circle_layers(x, sys.sigma, sys.comp, sys.starts, sys.sizes, sys.spacing, float(sys.separation), M)
    return list(layers), [(arg_g[m], par[m]) for m in range(M)]


@dataclass
class InterceptionCertificate:
    x: int
    y: int
    m: int
    chain: list  # (index reached after the jump, jump cost) per step
    total_cost: float

    def to_json(self):
        return {"x": self.x, "y": self.y, "m": self.m, "chain": [[int(i), float(c)] for i, c in self.chain], "total_cost": self.total_cost}


def replay(sys: DiscretizedSystem, cert: InterceptionCertificate) -> tuple:
    """Re-simulate a certificate; returns (total cost, terminal distance)."""
    cur = cert.x
    total = 0.0
    for nxt, _ in cert.chain:
        total += float(sys.distance(sys.sigma[cur], nxt))
        cur = nxt
    target = sys.power(cert.m)[cert.y]
    return total, float(sys.distance(cur, target))


def interception_cost(sys: DiscretizedSystem, x: int, y: int, M: int):
    """Cheapest epsilon-interception of y by x within M steps, with its certificate."""
    if M < 1:
        raise ValueError("M must be at least 1")
    if sys.dense is not None:
        layers, parents, _ = _dense_layers(sys, x, M, keep=True)
    else:
        layers, parents = _circle_layers_single(sys, x, M)
    P = _powers(sys, M)
    best, best_m, best_z = INF, -1, -1
    for m, D in enumerate(layers):
        t = P[m, y]
        ball = np.nonzero(sys.distance(np.arange(sys.n), np.full(sys.n, t)) <= sys.h + 1e-12)[0]
        z = ball[np.argmin(D[ball])]
        if D[z] < best - 1e-15:
            best, best_m, best_z = float(D[z]), m, int(z)
    if not math.isfinite(best):
        return best, None
    chain = []
    z = best_z
    for m in range(best_m, 0, -1):
        arg_g, par = parents[m - 1]
        p = par[z]
        w = arg_g[p]
        chain.append((z, float(sys.distance(p, z))))
        z = w
    chain.reverse()
    cert = InterceptionCertificate(x, y, best_m, chain, float(sum(c for _, c in chain)))
    return best, cert


def cost_rows(sys: DiscretizedSystem, sources, M: int) -> np.ndarray:
    """Interception costs from each source to every target."""
    sources = np.asarray(sources, dtype=np.int64)
    P = _powers(sys, M)
    if sys.dense is None:
        return _circle_rows(sources, sys.sigma, P, sys.comp, sys.starts, sys.sizes, sys.spacing, sys.window(), float(sys.separation), M)
    out = np.empty((len(sources), sys.n))
    within = sys.dense <= sys.h + 1e-12
    for r, x in enumerate(sources):
        layers, _, _ = _dense_layers(sys, int(x), M)
        best = np.full(sys.n, INF)
        for m, D in enumerate(layers):
            W = np.where(within, D[None, :], INF).min(axis=1)
            best = np.minimum(best, W[P[m]])
        out[r] = best
    return out


@dataclass
class AllPairsSummary:
    max_cost: float
    below: np.ndarray  # boolean matrix cost < threshold
    threshold: float
    costs: Optional[np.ndarray] = None


def all_pairs(sys: DiscretizedSystem, M: int, threshold: float, batch: int = 512, keep_costs: Optional[bool] = None) -> AllPairsSummary:
    n = sys.n
    if keep_costs is None:
        keep_costs = n <= 4096
    below = np.zeros((n, n), dtype=bool)
    costs = np.empty((n, n)) if keep_costs else None
    mx = 0.0
    for s in range(0, n, batch):
        src = np.arange(s, min(n, s + batch))
        rows = cost_rows(sys, src, M)
        mx = max(mx, float(rows.max()))
        below[src] = rows < threshold
        if keep_costs:
            costs[src] = rows
    return AllPairsSummary(mx, below, threshold, costs)


@dataclass
class ProximalityPartition:
    classes: list
    threshold: float
    horizon: int
    asymmetric: list = field(default_factory=list)
    max_cost: float = 0.0

    def labels(self, n: int) -> np.ndarray:
        out = np.full(n, -1)
        for k, cl in enumerate(self.classes):
            out[cl] = k
        return out

    def to_json(self):
        return {
            "classes": [sorted(int(i) for i in c) for c in self.classes],
            "threshold": self.threshold,
            "horizon": self.horizon,
            "asymmetric": [[int(a), int(b)] for a, b in self.asymmetric],
            "class_count": len(self.classes),
        }


def classify(sys: DiscretizedSystem, eps_class: float, M: int, batch: int = 512, max_asym: int = 1000) -> ProximalityPartition:
    """Classes of the relation 'cost below eps_class in both directions'."""
    summ = all_pairs(sys, M, eps_class, batch)
    A = summ.below
    return classify_from_matrix(A & A.T, A, eps_class, M, summ.max_cost, max_asym)


def classify_from_matrix(mutual: np.ndarray, below: np.ndarray, eps_class: float, M: int, max_cost: float, max_asym: int = 1000) -> ProximalityPartition:
    """Connected components of the mutual relation; asymmetric pairs are recorded."""
    asym = np.argwhere(below & ~below.T)
    n = mutual.shape[0]
    seen = np.zeros(n, dtype=bool)
    classes = []
    for x in range(n):
        if seen[x]:
            continue
        comp = np.zeros(n, dtype=bool)
        comp[x] = True
        frontier = np.array([x])
        while len(frontier):
            reach = np.zeros(n, dtype=bool)
            for k in range(0, len(frontier), 1024):
                reach |= mutual[frontier[k:k + 1024]].any(axis=0)
            reach &= ~comp
            comp |= reach
            frontier = np.nonzero(reach)[0]
        seen |= comp
        classes.append(np.nonzero(comp)[0])
    return ProximalityPartition(classes, eps_class, M, [tuple(int(v) for v in p) for p in asym[:max_asym]], max_cost)


def partition_invariant(sys: DiscretizedSystem, part: ProximalityPartition) -> bool:
    """Images of each class stay within h of the class."""
    labels = part.labels(sys.n)
    for cl in part.classes:
        img = sys.sigma[cl]
        members = np.asarray(cl)
        d = np.array([sys.distance(np.full(len(members), i), members).min() for i in img])
        if np.any(d > sys.h + 1e-12):
            return False
    return bool(np.all(labels >= 0))


# --- chain recurrence -------------------------------------------------------


def chain_recurrent(sys: DiscretizedSystem, x: int, b: float, eps: float, horizon: int = 1_000_000):
    """Search for a (b, eps)-chain from x back to x.

    Orbit segments are runs of sigma steps whose accumulated length reaches b
    before the next jump; every jump, including the one closing the cycle,
    costs at most eps.  Among closing chains the one with the least total jump
    cost is returned, so exact periodic orbits come back with zero jumps.
    Returns (found, chain) where chain lists (segment start, segment end, jump
    cost to the next start).  horizon caps the number of settled states.
    """
    if b <= 0 or eps <= 0:
        raise ValueError("b and eps must be positive")
    n = sys.n
    seg = sys.segment_lengths if sys.segment_lengths is not None else np.ones(n)
    step = float(seg.min())
    R = int(math.ceil(b / step - 1e-12))
    # states (point, steps since the last jump capped at R), Dijkstra on jump cost
    cost = {(x, 0): 0.0}
    parent = {}
    heap = [(0.0, x, 0)]
    neighbors = {}
    best, best_state = math.inf, None

    def near(p):
        if p not in neighbors:
            d = sys.distance(np.full(n, p), np.arange(n))
            neighbors[p] = [(int(j), float(d[j])) for j in np.nonzero(d <= eps + 1e-15)[0]]
        return neighbors[p]

    settled = 0
    while heap and settled < horizon:
        c, p, r = heapq.heappop(heap)
        if c > cost.get((p, r), math.inf) or c >= best:
            continue
        settled += 1
        q = int(sys.sigma[p])
        r2 = min(r + 1, R)
        if c < cost.get((q, r2), math.inf):
            cost[(q, r2)] = c
            parent[(q, r2)] = ((p, r), None)
            heapq.heappush(heap, (c, q, r2))
        if r2 < R:
            continue
        for j, d in near(q):
            if j == x and c + d < best:
                best, best_state = c + d, ((q, r2), d)
            if c + d < cost.get((j, 0), math.inf):
                cost[(j, 0)] = c + d
                parent[(j, 0)] = ((q, r2), d)
                heapq.heappush(heap, (c + d, j, 0))
    if best_state is None:
        return False, None
    state, closing = best_state
    return True, _unwind(parent, state, closing, x)


def _unwind(parent, state, closing, x):
    """Turn back pointers into (segment start, segment end, jump) triples."""
    jumps = []
    end = state[0]
    cur = state
    seg_end = end
    out = []
    while cur in parent:
        prev, jump = parent[cur]
        if jump is not None:
            out.append((cur[0], seg_end, None))
            seg_end = prev[0]
            jumps.append(jump)
        cur = prev
    out.append((x, seg_end, None))
    out.reverse()
    jumps.reverse()
    chain = []
    costs = jumps + [closing]
    for (s, e, _), c in zip(out, costs):
        chain.append((int(s), int(e), float(c)))
    return chain
