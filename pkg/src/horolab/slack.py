"""Slack calculus: Bruhat edge slacks, twist families, geometric slack and chain straightening."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import moebius as mb
from .errors import ConfigurationInvalid, DegenerateTwist, DomainError, NotDecomposable
from .lipschitz import PartialLipschitzFunction, hyperbolic_metric, mcshane_extend

CLAMP_TOL = 1e-6


@dataclass(frozen=True)
class SlackValue:
    value: float
    provenance: str  # bruhat | geometric | composed

    def __float__(self):
        return self.value


def clamp_slack(value: float, provenance: str = "bruhat") -> SlackValue:
    """Round float noise in (-1e-6, 0) up to 0; reject anything more negative."""
    if value < -CLAMP_TOL:
        raise ConfigurationInvalid(f"negative slack {value!r}")
    return SlackValue(max(value, 0.0), provenance)


def edge_slack(g_x: mb.MoebiusElement, v: mb.MoebiusElement, g_y: mb.MoebiusElement) -> SlackValue:
    return clamp_slack(mb.log_delta(g_x @ v @ g_y.inverse()), "bruhat")


def twist_correction(u_param: float, n_param: float, t: float) -> float:
    arg = 1.0 + math.exp(-t) * u_param * n_param
    if arg <= 1e-12:
        raise DegenerateTwist(f"1 + e^-t x y = {arg!r}")
    return 2.0 * math.log(arg)


@dataclass
class TwistFamily:
    edge_id: str
    k_range: tuple
    slacks: dict
    forward_limit: Optional[float]
    backward_limit: Optional[float] = None
    threshold: Optional[int] = None
    step: float = 0.0  # flow time added per unit of k
    u_param: float = 0.0
    n_param: float = 0.0
    residuals: dict = field(default_factory=dict)
    gaps: list = field(default_factory=list)

    def to_json(self):
        return {
            "edge_id": self.edge_id,
            "k_range": list(self.k_range),
            "slacks": {str(k): v for k, v in sorted(self.slacks.items())},
            "forward_limit": self.forward_limit,
            "backward_limit": self.backward_limit,
            "threshold": self.threshold,
            "step": self.step,
            "u_param": self.u_param,
            "n_param": self.n_param,
            "residuals": {str(k): v for k, v in sorted(self.residuals.items())},
            "gaps": self.gaps,
        }

    def csv_rows(self):
        return [(k, self.slacks[k], self.residuals.get(k, float("nan"))) for k in sorted(self.slacks)]


def _raw(m) -> np.ndarray:
    return m.to_array() if isinstance(m, mb.MoebiusElement) else np.asarray(m, dtype=float)


def twist_family(g_x, v, g_y, h_y, k_range, v_in=None, g_s=None, edge_id: str = "", tol: float = 1e-10) -> TwistFamily:
    """Slacks of the connector family obtained by twisting k times around the axis of h_y.

    Without v_in the family is v.h_y^k; after removing the deck shift it is
    constant, since h_y stabilizes the source axis.  With v_in and a source
    frame g_s the family is the path  s -> y -> x  with the middle twisted:
    slacks(k) = log_delta(g_x v h_y^-k v_in g_s^-1) - k * length(h_y).
    Products are formed on raw arrays so entries of size e^{k length/2} keep
    their relative precision.
    """
    lo, hi = int(k_range[0]), int(k_range[1])
    _, ell = mb.axis(h_y)
    gx, vv, gy, h = _raw(g_x), _raw(v), _raw(g_y), _raw(h_y)
    hinv = np.linalg.inv(h)
    if v_in is None:
        tail = np.linalg.inv(gy)
        # v h^k carries k more deck units than v, worth +k ell of flow time
        sign = 1
    else:
        tail = _raw(v_in) @ np.linalg.inv(_raw(g_s))
        sign = -1
    slacks, gaps = {}, []
    for k in range(lo, hi + 1):
        e = sign * k
        hk = np.linalg.matrix_power(h, e) if e >= 0 else np.linalg.matrix_power(hinv, -e)
        m = gx @ vv @ hk @ tail
        if abs(m[0, 0]) <= 1e-9:
            gaps.append(k)
            continue
        slacks[k] = 2.0 * math.log(abs(m[0, 0])) + e * ell
    if v_in is None:
        vals = [slacks[k] for k in sorted(slacks)]
        return TwistFamily(edge_id, (lo, hi), slacks, vals[-1] if vals else None, threshold=lo, step=ell, gaps=gaps)
    p = mb.normalize(gx @ vv @ np.linalg.inv(gy))
    q = mb.normalize(gy @ tail)
    bp, bq = mb.bruhat_nau(p), mb.bruhat_nau(q)
    x, y = bp.u_param, bq.n_param
    limit = bp.t + bq.t
    fam = TwistFamily(edge_id, (lo, hi), slacks, limit, step=ell, u_param=x, n_param=y, gaps=gaps)
    ks = sorted(slacks)
    for i in range(1, len(ks)):
        if abs(slacks[ks[i]] - slacks[ks[i - 1]]) < tol:
            fam.threshold = ks[i]
            break
    for k in ks:
        try:
            fam.residuals[k] = slacks[k] - limit - twist_correction(x, y, k * ell)
        except DegenerateTwist:
            pass
    return fam


def model_family(x: float, y: float, c: float, base: float = 0.0, k_range=(0, 40)) -> TwistFamily:
    """The model family a_{-kc} u_x a_{kc} n_y shifted by a_base, as a twisted 2-path."""
    g = mb.identity()
    out = mb.a_flow(base / 2) @ mb.u_elem(x)
    inn = mb.n_elem(y) @ mb.a_flow(base / 2)
    return twist_family(g, out, g, mb.a_flow(-c), k_range, v_in=inn, g_s=g, edge_id=f"model({x},{y},{c})")


def geometric_slack(polyline, tau: Callable) -> SlackValue:
    pts = np.asarray(polyline, dtype=complex)
    if len(pts) < 2:
        raise ValueError("polyline needs at least two points")
    if np.any(pts.imag <= 0):
        raise DomainError("polyline leaves the upper half-plane")
    length = float(np.sum(hyperbolic_metric(pts[:-1], pts[1:])))
    return SlackValue(length - (float(tau(pts[-1])) - float(tau(pts[0]))), "geometric")


def slack_minus(polyline, tau: Callable) -> SlackValue:
    """Slack at the other end: reverse the path and negate tau."""
    rev = np.asarray(polyline, dtype=complex)[::-1]
    return geometric_slack(rev, lambda z: -tau(z))


def busemann_tau(z):
    """tau = ln Im z, the Busemann function of the point at infinity."""
    return np.log(np.asarray(z, dtype=complex).imag)


def line_points(line: mb.GeodesicLine, s: np.ndarray, ref: complex = 1j) -> np.ndarray:
    """Points at arclengths s along line, measured from the projection of ref."""
    m = mb._to_imaginary_axis(line)
    conj = m.inverse()
    w = 1j * abs(complex(m(ref))) * np.exp(np.asarray(s, dtype=float))
    return (conj.a * w + conj.b) / (conj.c * w + conj.d)


def connector_tau(spec, target, source, word, span: float = 30.0, step: float = 2e-3):
    """McShane model tau from samples on the target axis and on the translated source axis."""
    m = spec.evaluate(word)
    s = np.arange(-span, span + step / 2, step)
    tgt = line_points(target.axis, s)
    # source points are images under m of points on the source axis
    src_base = line_points(source.axis, s)
    src = (m.a * src_base + m.b) / (m.c * src_base + m.d)
    dom = np.concatenate([tgt, src])
    val = np.concatenate([s, s + spec.c * spec.degree(word)])
    f = PartialLipschitzFunction(dom, val, hyperbolic_metric)
    return lambda q: mcshane_extend(f, np.atleast_1d(q), check=False)[0]


def connector_polyline(line: mb.GeodesicLine, half: float = 12.0, step: float = 1e-3) -> np.ndarray:
    return line_points(line, np.arange(-half, half + step / 2, step))


def connector_geometric_slack(spec, target, source, cand, half: float = 12.0, step: float = 1e-3) -> SlackValue:
    """Independent slack of a connector: polyline length minus the model tau increment."""
    tau = connector_tau(spec, target, source, cand.word)
    return geometric_slack(connector_polyline(cand.line, half, step), tau)


# --- broken geodesic chains -------------------------------------------------


@dataclass
class BrokenChain:
    starts: list  # UnitTangent at the start of each segment
    lengths: list
    jump_total: float
    min_segment_length: float = 1.0

    def __post_init__(self):
        if min(self.lengths) < self.min_segment_length:
            raise ValueError("segment shorter than the floor")

    def segment_points(self, i: int, n: int = 40) -> np.ndarray:
        ts = np.linspace(0.0, self.lengths[i], n)
        return np.array([mb.flow(t, self.starts[i]).basepoint for t in ts])

    def endpoints(self):
        last = mb.flow(self.lengths[-1], self.starts[-1])
        return self.starts[0].basepoint, last.basepoint

    def jumps(self) -> list:
        out = []
        for i in range(len(self.starts) - 1):
            end = mb.flow(self.lengths[i], self.starts[i])
            out.append(mb.t1_distance(end, self.starts[i + 1]))
        return out


@dataclass
class ComparisonReport:
    straight_slack: float
    chain_slack: float
    difference: float
    epsilon: float
    hausdorff: float

    @property
    def ratio(self) -> float:
        return self.difference / self.epsilon if self.epsilon > 0 else 0.0

    @property
    def hausdorff_ratio(self) -> float:
        return self.hausdorff / self.epsilon if self.epsilon > 0 else 0.0

    def to_json(self):
        return {
            "straight_slack": self.straight_slack,
            "chain_slack": self.chain_slack,
            "difference": self.difference,
            "epsilon": self.epsilon,
            "hausdorff": self.hausdorff,
            "ratio": self.ratio,
            "hausdorff_ratio": self.hausdorff_ratio,
        }


def _distance_to_line(pts: np.ndarray, line: mb.GeodesicLine) -> np.ndarray:
    m = mb._to_imaginary_axis(line)
    w = (m.a * pts + m.b) / (m.c * pts + m.d)
    return np.arcsinh(np.abs(w.real) / w.imag)


def _distance_to_segment(pts: np.ndarray, p: complex, q: complex) -> np.ndarray:
    """Exact distance from points to the geodesic arc [p, q]."""
    m = mb._to_imaginary_axis(_line_through(p, q))
    w = (m.a * pts + m.b) / (m.c * pts + m.d)
    hp, hq = sorted([complex(m(p)).imag, complex(m(q)).imag])
    r = np.abs(w)
    inside = (r >= hp) & (r <= hq)
    to_line = np.arcsinh(np.abs(w.real) / w.imag)
    ends = np.minimum(hyperbolic_metric(w, 1j * hp), hyperbolic_metric(w, 1j * hq))
    return np.where(inside, to_line, ends)


def straighten_and_compare(chain: BrokenChain, tau: Callable = busemann_tau, samples: int = 40) -> ComparisonReport:
    """Compare the straightened path with the chain.

    Distance to a geodesic is convex along a geodesic arc, so the chain side of
    the Hausdorff distance is attained at segment endpoints; the other side is
    sampled along the straight path with exact point-to-arc distances.
    """
    p, q = chain.endpoints()
    line = _line_through(p, q)
    n = len(chain.lengths)
    ends = [(chain.starts[i].basepoint, mb.flow(chain.lengths[i], chain.starts[i]).basepoint) for i in range(n)]
    chain_slack = sum(geometric_slack(np.array(e), tau).value for e in ends)
    straight_slack = geometric_slack(np.array([p, q]), tau).value
    corners = np.array([z for e in ends for z in e])
    h1 = float(np.max(_distance_to_line(corners, line)))
    straight = line_points(line, np.linspace(0.0, mb.hyperbolic_distance(p, q), samples * n), p)
    dist = np.min([_distance_to_segment(straight, a, b) for a, b in ends], axis=0)
    h2 = float(np.max(dist))
    return ComparisonReport(straight_slack, chain_slack, abs(straight_slack - chain_slack), chain.jump_total, max(h1, h2))


def _line_through(p: complex, q: complex) -> mb.GeodesicLine:
    """Geodesic from p toward q, as a pair of boundary points."""
    if abs(p.real - q.real) < 1e-14 * max(1.0, abs(p), abs(q)):
        return mb.GeodesicLine(p.real, mb.INF) if q.imag > p.imag else mb.GeodesicLine(mb.INF, p.real)
    # center of the semicircle on the real line
    x0 = (abs(q) ** 2 - abs(p) ** 2) / (2.0 * (q.real - p.real))
    r = abs(p - x0)
    lo, hi = x0 - r, x0 + r
    return mb.GeodesicLine(lo, hi) if q.real > p.real else mb.GeodesicLine(hi, lo)


def random_chain(rng: np.random.Generator, n_segments: int = 10, length_range=(1.0, 2.0), epsilon: float = 1e-2) -> BrokenChain:
    """Chain of geodesic segments whose junction jumps sum to epsilon.

    Each jump moves the base point a distance a along a random direction and then
    turns by b, with a + b equal to the jump budget of that junction.
    """
    v = mb.UnitTangent(complex(rng.uniform(-1, 1), math.exp(rng.uniform(-1, 1))), rng.uniform(-math.pi, math.pi))
    lengths = list(rng.uniform(*length_range, size=n_segments))
    share = rng.dirichlet(np.ones(n_segments - 1)) * epsilon
    starts = [v]
    for i in range(n_segments - 1):
        end = mb.flow(lengths[i], starts[-1])
        frac = rng.uniform()
        move, turn = share[i] * frac, share[i] * (1 - frac)
        # move: step along a random direction at the base point
        phi = rng.uniform(-math.pi, math.pi)
        side = mb.UnitTangent(end.basepoint, phi)
        moved = mb.flow(move, side).basepoint
        # parallel transport of the direction along that short step changes it by
        # at most the enclosed area, which is O(move^2); recompute via t1_distance
        cand = mb.UnitTangent(moved, mb.wrap_angle(end.direction + rng.choice([-1, 1]) * turn))
        starts.append(cand)
    chain = BrokenChain(starts, lengths, 0.0, min(length_range[0], min(lengths)))
    chain.jump_total = float(sum(chain.jumps()))
    return chain


def chain_suite(seed: int, trials: int = 1000, n_segments: int = 10, eps_range=(1e-4, 1e-1), tau: Callable = busemann_tau):
    """Randomized straightening harness; returns (kappa_hat, hausdorff_hat, reports)."""
    rng = np.random.default_rng(seed)
    reports = []
    for _ in range(trials):
        eps = float(np.exp(rng.uniform(math.log(eps_range[0]), math.log(eps_range[1]))))
        chain = random_chain(rng, n_segments, (1.0, 2.0), eps)
        reports.append(straighten_and_compare(chain, tau, samples=12))
    kappa = max(r.ratio for r in reports)
    haus = max(r.hausdorff_ratio for r in reports)
    return kappa, haus, reports


# --- excursion calibration --------------------------------------------------


def excursion_calibration(spec, vertices, epsilon0: float = 0.2, trials: int = 2000, seed: int = 0, ball_radius: float = 3.0, density: float = 0.05, compat=None):
    """Smallest slack per unit length over random unit arcs kept epsilon0 away from the axes.

    Returns (delta_hat, n_kept).  Raises ConfigurationInvalid when the sampled
    model tau is not 1-Lipschitz.
    """
    from .cover import sample_model_tau

    f, report = compat if compat is not None else sample_model_tau(spec, vertices, ball_radius, density, max_len=4)
    if report.count:
        raise ConfigurationInvalid(f"model tau has {report.count} Lipschitz violations")
    lines = _translate_lines(spec, vertices, 4, ball_radius)
    rng = np.random.default_rng(seed)
    best, kept = math.inf, 0
    for _ in range(trials):
        # basepoints well inside the sampled ball so the model tau is meaningful
        r = rng.uniform(0, 1.0)
        z = complex(mb.geodesic_point(mb.GeodesicLine(-1.0, 1.0), r * rng.choice([-1, 1])))
        rot = rng.uniform(-math.pi, math.pi)
        v = mb.UnitTangent(complex(z.real + rng.uniform(-0.3, 0.3), z.imag * math.exp(rng.uniform(-0.3, 0.3))), rot)
        pts = [mb.flow(t, v) for t in np.linspace(0.0, 1.0, 6)]
        if min(_t1_to_lines(w, lines) for w in pts) < epsilon0:
            continue
        kept += 1
        tau = lambda q: mcshane_extend(f, np.atleast_1d(q), check=False)[0]
        poly = np.array([w.basepoint for w in pts])
        # the arc is a geodesic, so its length is exactly 1
        s = 1.0 - (tau(poly[-1]) - tau(poly[0]))
        best = min(best, s)
    return best, kept


def _translate_lines(spec, vertices, max_len: int, radius: float) -> list:
    from .cover import enumerate_words

    out = []
    words = [((), mb.identity(), 0)] + list(enumerate_words(spec, max_len))
    for v in vertices:
        for _, m, _ in words:
            line = mb.GeodesicLine(m(v.axis.xi_minus), m(v.axis.xi_plus))
            if _distance_to_line(np.array([1j]), line)[0] > radius + 2:
                continue
            if not any(line.same_as(l) for l in out):
                out.append(line)
    return out


def _t1_to_lines(v: mb.UnitTangent, lines: Sequence) -> float:
    """T^1 distance from v to the tangent of the nearest line at the foot of v's base point."""
    best = math.inf
    for line in lines:
        if _distance_to_line(np.array([v.basepoint]), line)[0] > best:
            continue
        m = mb._to_imaginary_axis(line)
        foot = abs(complex(m(v.basepoint)))
        w = mb.act_tangent(m.inverse(), mb.UnitTangent(1j * foot, math.pi / 2))
        best = min(best, mb.t1_distance(v, w))
    return best
