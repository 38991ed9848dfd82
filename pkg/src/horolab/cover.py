"""Fuchsian group with a degree homomorphism, vertex axes and connector discovery."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import moebius as mb
from .errors import BudgetExceeded, NonPositiveDegree, NotDecomposable, NotHyperbolic
from .lipschitz import PartialLipschitzFunction, hyperbolic_metric

Letter = tuple  # (generator name, +1 or -1)
Word = tuple


def parse_word(text) -> Word:
    """'g0 g3 g1^-1' -> (('g0', 1), ('g3', 1), ('g1', -1))."""
    if isinstance(text, (list, tuple)):
        tokens = list(text)
    else:
        tokens = text.split()
    out = []
    for tok in tokens:
        if isinstance(tok, (list, tuple)):
            out.append((tok[0], int(tok[1])))
        elif tok.endswith("^-1"):
            out.append((tok[:-3], -1))
        else:
            out.append((tok, 1))
    return tuple(out)


def format_word(word: Word) -> str:
    return " ".join(name if e == 1 else f"{name}^-1" for name, e in word)


def invert_word(word: Word) -> Word:
    return tuple((name, -e) for name, e in reversed(word))


@dataclass
class FuchsianCoverSpec:
    generators: dict
    phi: dict
    c: float
    relations: list = field(default_factory=list)
    vertex_words: dict = field(default_factory=dict)
    name: str = ""

    def letters(self) -> list:
        out = []
        for g in self.generators:
            out.append((g, 1))
            out.append((g, -1))
        return out

    def letter_matrix(self, letter: Letter) -> mb.MoebiusElement:
        m = self.generators[letter[0]]
        return m if letter[1] == 1 else m.inverse()

    def evaluate(self, word: Word) -> mb.MoebiusElement:
        m = mb.identity()
        for letter in word:
            m = m @ self.letter_matrix(letter)
        return m

    def degree(self, word: Word) -> int:
        return sum(self.phi.get(name, 0) * e for name, e in word)

    @classmethod
    def from_json(cls, data: dict) -> "FuchsianCoverSpec":
        gens = {}
        for name, entries in data["generators"].items():
            gens[name] = mb.normalize(np.asarray(entries, dtype=float).reshape(2, 2))
        return cls(
            generators=gens,
            phi={k: int(v) for k, v in data["phi"].items()},
            c=float(data["c"]),
            relations=[parse_word(r) for r in data.get("relations", [])],
            vertex_words={k: parse_word(v) for k, v in data.get("vertices", {}).items()},
            name=data.get("name", ""),
        )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "generators": {k: list(m.as_tuple()) for k, m in self.generators.items()},
            "phi": dict(self.phi),
            "c": self.c,
            "relations": [format_word(r) for r in self.relations],
            "vertices": {k: format_word(w) for k, w in self.vertex_words.items()},
        }


def load_spec(path) -> FuchsianCoverSpec:
    return FuchsianCoverSpec.from_json(json.loads(Path(path).read_text()))


def shipped_bundle_path() -> Path:
    return Path(__file__).parent / "data" / "genus2-octagon.json"


def load_shipped_bundle() -> FuchsianCoverSpec:
    return load_spec(shipped_bundle_path())


@dataclass
class ValidationReport:
    residuals: dict
    phi_residuals: dict
    near_identity: list
    ok: bool

    def to_json(self):
        return {
            "residuals": self.residuals,
            "phi_residuals": self.phi_residuals,
            "near_identity": [format_word(w) for w in self.near_identity],
            "ok": self.ok,
        }


def validate_group(spec: FuchsianCoverSpec, disc_len: int = 3, rel_tol: float = 1e-7) -> ValidationReport:
    residuals, phi_res = {}, {}
    for rel in spec.relations:
        key = format_word(rel)
        residuals[key] = mb.frobenius(spec.evaluate(rel), mb.identity())
        phi_res[key] = spec.degree(rel)
    near = []
    for word, m, _ in enumerate_words(spec, disc_len):
        if mb.frobenius(m, mb.identity()) < 1e-4:
            near.append(word)
    ok = all(r < rel_tol for r in residuals.values()) and all(v == 0 for v in phi_res.values())
    # words equal to the identity through the relations are expected when the
    # relator is short; only flag them when no relation explains them
    rel_len = min((len(r) for r in spec.relations), default=10**9)
    unexplained = [w for w in near if len(w) < rel_len]
    ok = ok and not unexplained
    return ValidationReport(residuals, phi_res, near, ok)


def word_count(n_gens: int, max_len: int) -> int:
    k = 2 * n_gens
    return sum(k * (k - 1) ** (n - 1) for n in range(1, max_len + 1))


def enumerate_words(spec: FuchsianCoverSpec, max_len: int, cap: int = 2_000_000) -> Iterator:
    """Reduced nonempty words in shortlex order with their matrices and degrees."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if word_count(len(spec.generators), max_len) > cap:
        raise BudgetExceeded(f"more than {cap} words up to length {max_len}")
    letters = spec.letters()
    mats = [spec.letter_matrix(l).to_array() for l in letters]
    degs = [spec.phi.get(l[0], 0) * l[1] for l in letters]
    layer = [((), np.eye(2), 0)]
    for _ in range(max_len):
        nxt = []
        for word, m, d in layer:
            for i, letter in enumerate(letters):
                if word and word[-1][0] == letter[0] and word[-1][1] == -letter[1]:
                    continue
                nxt.append((word + (letter,), m @ mats[i], d + degs[i]))
        for word, m, d in nxt:
            yield word, mb.normalize(m), d
        layer = nxt


@dataclass
class VertexSpec:
    name: str
    word: Word
    matrix: mb.MoebiusElement
    axis: mb.GeodesicLine
    length: float
    degree: int
    base_lift: mb.MoebiusElement
    length_ok: bool = True

    def to_json(self):
        return {
            "name": self.name,
            "word": format_word(self.word),
            "matrix": list(self.matrix.as_tuple()),
            "axis": self.axis.to_json(),
            "length": self.length,
            "degree": self.degree,
            "base_lift": list(self.base_lift.as_tuple()),
            "length_ok": self.length_ok,
        }


def build_vertices(spec: FuchsianCoverSpec, vertex_words=None) -> list:
    if vertex_words is None:
        vertex_words = spec.vertex_words
    if not isinstance(vertex_words, dict):
        vertex_words = {f"v{i}": w for i, w in enumerate(vertex_words)}
    out = []
    for name, w in vertex_words.items():
        word = parse_word(w)
        m = spec.evaluate(word)
        line, length = mb.axis(m)  # raises NotHyperbolic
        deg = spec.degree(word)
        if deg <= 0:
            raise NonPositiveDegree(f"vertex {name} has degree {deg}")
        ok = abs(length - deg * spec.c) < 1e-6
        out.append(VertexSpec(name, word, m, line, length, deg, mb.frame_of_line(line), ok))
    return out


@dataclass
class ConnectorCandidate:
    source_vertex: str
    target_vertex: str
    source_sheet: int
    word: Word
    matrix: mb.MoebiusElement
    line: mb.GeodesicLine
    raw_slack: float

    def to_json(self):
        return {
            "source_vertex": self.source_vertex,
            "target_vertex": self.target_vertex,
            "source_sheet": self.source_sheet,
            "word": format_word(self.word),
            "matrix": list(self.matrix.as_tuple()),
            "line": self.line.to_json(),
            "raw_slack": self.raw_slack,
        }


def source_lift(spec: FuchsianCoverSpec, vertex: VertexSpec, word: Word, m: mb.MoebiusElement) -> mb.MoebiusElement:
    """Base lift of the translated source at tau = 0: a_{-c deg(w)} g_y w^{-1}."""
    return mb.a_flow(-spec.c * spec.degree(word)) @ vertex.base_lift @ m.inverse()


def connector_slack(spec, target: VertexSpec, source: VertexSpec, word: Word, m=None) -> float:
    if m is None:
        m = spec.evaluate(word)
    return mb.log_delta(target.base_lift @ source_lift(spec, source, word, m).inverse())


def _dedup_key(target: VertexSpec, r: float) -> tuple:
    # the target stabilizer scales frame coordinates by exp(length)
    return (1 if r > 0 else -1, math.log(abs(r)) % target.length)


def enumerate_connectors(spec: FuchsianCoverSpec, vertices: Sequence[VertexSpec], max_len: int, slack_cap: float, cap: int = 2_000_000):
    """Connector geodesics from each source axis lift to each base target axis.

    Returns (candidates, skipped) where skipped counts non-decomposable words.
    """
    skipped = 0
    found = []
    keys = {}
    words = list(enumerate_words(spec, max_len, cap))
    for target in vertices:
        g_x = target.base_lift
        for source in vertices:
            for word, m, deg in words:
                src_minus = m(source.axis.xi_minus)
                src_plus = m(source.axis.xi_plus)
                line_src = mb.GeodesicLine(src_minus, src_plus)
                if line_src.same_as(target.axis):
                    continue
                try:
                    s = mb.log_delta(g_x @ source_lift(spec, source, word, m).inverse())
                except mb.NotDecomposable:
                    skipped += 1
                    continue
                if s > slack_cap:
                    continue
                r = g_x(src_minus)
                if math.isinf(r) or abs(r) > 1e12 or r == 0:
                    continue
                line = mb.GeodesicLine(src_minus, target.axis.xi_plus)
                if line.same_as(target.axis) or line.same_as(line_src):
                    continue
                key = (source.name, _dedup_key(target, r))
                bucket = keys.setdefault((target.name, source.name, key[1][0]), [])
                if any(_circ_close(key[1][1], k, target.length) for k in bucket):
                    continue
                bucket.append(key[1][1])
                sheet = deg % source.degree
                found.append(ConnectorCandidate(source.name, target.name, sheet, word, m, line, s))
    found.sort(key=lambda cc: (cc.target_vertex, cc.source_vertex, cc.raw_slack, len(cc.word)))
    return found, skipped


def _circ_close(a: float, b: float, period: float, tol: float = 1e-7) -> bool:
    d = abs(a - b) % period
    return min(d, period - d) < tol


def dedup_connectors(cands: Sequence[ConnectorCandidate], vertices: Sequence[VertexSpec]) -> list:
    """Idempotent re-run of the line-based deduplication."""
    by_name = {v.name: v for v in vertices}
    out, seen = [], {}
    for cc in cands:
        t = by_name[cc.target_vertex]
        r = t.base_lift(cc.line.xi_minus)
        sign, val = _dedup_key(t, r)
        bucket = seen.setdefault((cc.target_vertex, cc.source_vertex, sign), [])
        if any(_circ_close(val, k, t.length) for k in bucket):
            continue
        bucket.append(val)
        out.append(cc)
    return out


def connector_graph_json(vertices: Sequence[VertexSpec], cands: Sequence[ConnectorCandidate]) -> dict:
    """Slack graph on vertex sheets; a vertex of degree d contributes d sheets.

    An edge found from sheet s of y into sheet 0 of x is replicated by the deck
    action as an edge from sheet s + r of y into sheet r of x.
    """
    verts = []
    for v in vertices:
        for r in range(v.degree):
            verts.append({"id": f"{v.name}#{r}", "flag": "imc"})
    deg = {v.name: v.degree for v in vertices}
    edges = []
    for i, cc in enumerate(cands):
        for r in range(deg[cc.target_vertex]):
            src = f"{cc.source_vertex}#{(cc.source_sheet + r) % deg[cc.source_vertex]}"
            dst = f"{cc.target_vertex}#{r}"
            edges.append({"id": f"c{i}.{r}", "src": src, "dst": dst, "slack": cc.raw_slack})
    return {"vertices": verts, "edges": edges}


@dataclass
class CompatibilityReport:
    n_points: int
    n_lines: int
    violations: list
    worst_margin: float

    @property
    def count(self) -> int:
        return len(self.violations)

    def to_json(self):
        return {
            "n_points": self.n_points,
            "n_lines": self.n_lines,
            "violation_count": self.count,
            "worst_margin": self.worst_margin,
        }


def axis_samples(line: mb.GeodesicLine, center: complex, radius: float, density: float):
    """Signed arclength parameters of points of line inside the ball, spacing density."""
    m = mb._to_imaginary_axis(line)
    w = complex(m(center))
    # distance from center to the line and arclength of its foot
    foot = abs(w)
    d0 = math.asinh(abs(w.real) / w.imag) if w.imag > 0 else math.inf
    if d0 > radius:
        return np.array([]), np.array([], dtype=complex)
    half = math.acosh(math.cosh(radius) / math.cosh(d0))
    s = np.arange(-half, half + 1e-12, density)
    minv = m.inverse()
    pts = np.array([complex(minv(complex(0.0, foot * math.exp(t)))) for t in s])
    return s, pts


def sample_model_tau(
    spec: FuchsianCoverSpec,
    vertices: Sequence[VertexSpec],
    ball_radius: float,
    density: float,
    max_len: int = 6,
    center: complex = 1j,
    tol: float = 1e-9,
):
    """tau samples on axis translates inside a ball, with the pairwise compatibility scan."""
    pts, vals = [], []
    lines = []
    words = [((), mb.identity(), 0)] + list(enumerate_words(spec, max_len))
    for v in vertices:
        seen = []
        for word, m, deg in words:
            line = mb.GeodesicLine(m(v.axis.xi_minus), m(v.axis.xi_plus))
            if any(line.same_as(l) for l in seen):
                continue
            seen.append(line)
            # tau at the image of the base point is c * deg(word); the image of the
            # foot of i on the axis is not the foot of the center on the new line,
            # so parameterize from the image of the base point
            base = m(v.axis.nearest_point(1j))
            s, p = axis_samples(line, center, ball_radius, density)
            if len(s) == 0:
                continue
            s0 = _signed_offset(line, base, center)
            pts.append(p)
            vals.append(s - s0 + spec.c * deg)
            lines.append(line)
    if not pts:
        dom = np.array([], dtype=complex)
        val = np.array([])
    else:
        dom = np.concatenate(pts)
        val = np.concatenate(vals)
    f = PartialLipschitzFunction(dom, val, hyperbolic_metric)
    return f, compatibility_scan(dom, val, len(lines), tol)


def compatibility_scan(dom, val, n_lines: int = 0, tol: float = 1e-9, block: int = 1024) -> CompatibilityReport:
    """Ordered pairs whose tau difference exceeds their hyperbolic distance."""
    dom = np.asarray(dom, dtype=complex)
    val = np.asarray(val, dtype=float)
    violations = []
    worst = -np.inf
    n = len(val)
    for start in range(0, n, block):
        rows = slice(start, min(n, start + block))
        d = hyperbolic_metric(dom[rows, None], dom[None, :])
        margin = val[rows, None] - val[None, :] - d
        if margin.size:
            worst = max(worst, float(margin.max()))
        for i, j in zip(*np.nonzero(margin > tol)):
            violations.append((start + int(i), int(j), float(margin[i, j])))
    return CompatibilityReport(n, n_lines, violations, worst)


def _signed_offset(line: mb.GeodesicLine, point: complex, center: complex) -> float:
    """Arclength parameter of point measured from the foot of center, toward xi_plus."""
    m = mb._to_imaginary_axis(line)
    return math.log(abs(complex(m(point))) / abs(complex(m(center))))
