"""Linear-fractional geometry of the upper half-plane and its unit tangent bundle.

Conventions used throughout the package:

* ``a_t = diag(e^{t/2}, e^{-t/2})`` is the geodesic flow, acting on the left.
* ``N`` is lower-unipotent (stable horocycle), ``U`` is upper-unipotent.
* A group element ``g`` is identified with the unit tangent vector
  ``g^{-1} . (i, pointing down)``.  With this choice left multiplication by
  ``a_t`` moves the vector a distance ``t`` forward along its geodesic and
  left multiplication by ``n`` in ``N`` is contracted by the forward flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NearSingular, NotDecomposable, NotHyperbolic

ALG_TOL = 1e-9
INF = math.inf

Boundary = float  # a real number or math.inf


class MoebiusElement:
    """A unimodular 2x2 real matrix modulo sign, stored in canonical form."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)
        self.d = float(d)

    @classmethod
    def from_array(cls, m) -> "MoebiusElement":
        return normalize(m)

    def to_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def as_tuple(self):
        return (self.a, self.b, self.c, self.d)

    def __matmul__(self, other: "MoebiusElement") -> "MoebiusElement":
        return normalize(self.to_array() @ other.to_array())

    def inverse(self) -> "MoebiusElement":
        return normalize([[self.d, -self.b], [-self.c, self.a]])

    def trace(self) -> float:
        return self.a + self.d

    def __call__(self, z):
        """Act on a point of the closed upper half-plane (inf allowed)."""
        if z == INF or (isinstance(z, float) and math.isinf(z)):
            return INF if self.c == 0 else self.a / self.c
        den = self.c * z + self.d
        if den == 0:
            return INF
        return (self.a * z + self.b) / den

    def derivative_arg(self, z: complex) -> float:
        """Rotation angle of the differential at z."""
        return -2.0 * np.angle(self.c * z + self.d)

    def isclose(self, other: "MoebiusElement", tol: float = ALG_TOL) -> bool:
        return frobenius(self, other) < tol

    def __repr__(self):
        return f"MoebiusElement([[{self.a!r}, {self.b!r}], [{self.c!r}, {self.d!r}]])"

    def __eq__(self, other):
        return isinstance(other, MoebiusElement) and self.as_tuple() == other.as_tuple()

    def __hash__(self):
        return hash(self.as_tuple())


def normalize(m) -> MoebiusElement:
    if isinstance(m, MoebiusElement):
        m = m.to_array()
    arr = np.asarray(m, dtype=float).reshape(2, 2)
    det = arr[0, 0] * arr[1, 1] - arr[0, 1] * arr[1, 0]
    if abs(det) <= 1e-12:
        raise NearSingular(f"determinant {det!r} too small")
    if det < 0:
        raise NearSingular(f"orientation-reversing matrix (det {det!r})")
    arr = arr / math.sqrt(det)
    for entry in arr.flat:
        if entry != 0:
            if entry < 0:
                arr = -arr
            break
    arr = arr + 0.0  # drop negative zeros
    return MoebiusElement(arr[0, 0], arr[0, 1], arr[1, 0], arr[1, 1])


def frobenius(m1: MoebiusElement, m2: MoebiusElement) -> float:
    """Frobenius distance between canonical representatives."""
    return float(np.linalg.norm(m1.to_array() - m2.to_array()))


def identity() -> MoebiusElement:
    return MoebiusElement(1.0, 0.0, 0.0, 1.0)


def a_flow(t: float) -> MoebiusElement:
    return MoebiusElement(math.exp(t / 2), 0.0, 0.0, math.exp(-t / 2))


def n_elem(y: float) -> MoebiusElement:
    return normalize([[1.0, 0.0], [y, 1.0]])


def u_elem(x: float) -> MoebiusElement:
    return normalize([[1.0, x], [0.0, 1.0]])


def _check_point(z):
    if not np.imag(z) > 0:
        raise DomainError(f"point {z!r} is not in the upper half-plane")


def hyperbolic_distance(z: complex, w: complex) -> float:
    _check_point(z)
    _check_point(w)
    z = complex(z)
    w = complex(w)
    # 2*arcsinh form is better conditioned for nearby points
    r = abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag))
    return 2.0 * math.asinh(r)


@dataclass(frozen=True)
class NAUDecomposition:
    n_param: float
    t: float
    u_param: float

    def reconstruct(self) -> MoebiusElement:
        return n_elem(self.n_param) @ a_flow(self.t) @ u_elem(self.u_param)


def bruhat_nau(m: MoebiusElement) -> NAUDecomposition:
    if not isinstance(m, MoebiusElement):
        m = normalize(m)
    if abs(m.a) <= 1e-9:
        raise NotDecomposable(f"(1,1) entry {m.a!r} too small")
    return NAUDecomposition(n_param=m.c / m.a, t=2.0 * math.log(abs(m.a)), u_param=m.b / m.a)


def log_delta(m: MoebiusElement) -> float:
    if not isinstance(m, MoebiusElement):
        m = normalize(m)
    if abs(m.a) <= 1e-9:
        raise NotDecomposable(f"(1,1) entry {m.a!r} too small")
    return 2.0 * math.log(abs(m.a))


@dataclass(frozen=True)
class GeodesicLine:
    xi_minus: float
    xi_plus: float

    def __post_init__(self):
        if self.xi_minus == self.xi_plus:
            raise DomainError("geodesic endpoints must differ")

    def to_json(self):
        enc = lambda v: "inf" if math.isinf(v) else v
        return [enc(self.xi_minus), enc(self.xi_plus)]

    @classmethod
    def from_json(cls, pair):
        dec = lambda v: INF if v == "inf" else float(v)
        return cls(dec(pair[0]), dec(pair[1]))

    def same_as(self, other: "GeodesicLine", tol: float = 1e-9) -> bool:
        return _bd_close(self.xi_minus, other.xi_minus, tol) and _bd_close(
            self.xi_plus, other.xi_plus, tol
        )

    def nearest_point(self, z: complex = 1j) -> complex:
        """Orthogonal projection of z onto the line."""
        return geodesic_point(self, 0.0, z)


def _bd_close(p: float, q: float, tol: float) -> bool:
    if math.isinf(p) or math.isinf(q):
        return math.isinf(p) and math.isinf(q)
    return abs(p - q) < tol * max(1.0, abs(p), abs(q))


def axis(m: MoebiusElement) -> tuple[GeodesicLine, float]:
    tr = abs(m.trace())
    if tr <= 2.0 + 1e-9:
        raise NotHyperbolic(f"|trace| = {tr!r}")
    length = 2.0 * math.acosh(tr / 2.0)
    a, b, c, d = m.as_tuple()
    if m.trace() < 0:
        a, b, c, d = -a, -b, -c, -d
    if abs(c) < 1e-15:
        # fixed points: inf and b/(d-a); inf attracts iff a > d
        p = b / (d - a)
        return (GeodesicLine(p, INF) if a > d else GeodesicLine(INF, p)), length
    disc = math.sqrt((a + d) ** 2 - 4.0)
    r1 = (a - d + disc) / (2.0 * c)
    r2 = (a - d - disc) / (2.0 * c)
    # derivative at a fixed point z is 1/(cz+d)^2; attracting iff |cz+d| > 1
    if abs(c * r1 + d) > 1.0:
        attract, repel = r1, r2
    else:
        attract, repel = r2, r1
    return GeodesicLine(repel, attract), length


def _to_imaginary_axis(line: GeodesicLine) -> MoebiusElement:
    """An isometry sending xi_minus to 0 and xi_plus to inf."""
    p, q = line.xi_minus, line.xi_plus
    if math.isinf(p):
        return normalize([[0.0, -1.0], [1.0, -q]])  # -1/(z-q): q -> inf, inf -> 0
    if math.isinf(q):
        return normalize([[1.0, -p], [0.0, 1.0]])
    if p < q:
        return normalize([[1.0, -p], [-1.0, q]])
    return normalize([[1.0, -p], [1.0, -q]])


def geodesic_point(line: GeodesicLine, s: float, ref: complex = 1j) -> complex:
    """Point at signed arclength s from the projection of ref, toward xi_plus."""
    m = _to_imaginary_axis(line)
    h = abs(complex(m(ref))) * math.exp(s)
    return complex(m.inverse()(complex(0.0, h)))


def line_tangent(line: GeodesicLine, s: float = 0.0, ref: complex = 1j) -> "UnitTangent":
    m = _to_imaginary_axis(line)
    h = abs(complex(m(ref))) * math.exp(s)
    return act_tangent(m.inverse(), UnitTangent(complex(0.0, h), math.pi / 2))


def frame_of_line(line: GeodesicLine, s: float = 0.0, ref: complex = 1j) -> MoebiusElement:
    """Group element whose vector sits on the line at arclength s past the projection of ref."""
    return element_of(line_tangent(line, s, ref))


@dataclass(frozen=True)
class UnitTangent:
    basepoint: complex
    direction: float

    def __post_init__(self):
        if not self.basepoint.imag > 0:
            raise DomainError("basepoint must lie in the upper half-plane")
        object.__setattr__(self, "direction", wrap_angle(self.direction))


def wrap_angle(theta: float) -> float:
    t = math.fmod(theta + math.pi, 2.0 * math.pi)
    if t <= 0:
        t += 2.0 * math.pi
    return t - math.pi


DOWN = -math.pi / 2.0


def act_tangent(m: MoebiusElement, v: UnitTangent) -> UnitTangent:
    z = v.basepoint
    return UnitTangent(complex(m(z)), v.direction + m.derivative_arg(z))


def tangent_of(g: MoebiusElement) -> UnitTangent:
    """Unit tangent vector represented by the group element g."""
    return act_tangent(g.inverse(), UnitTangent(1j, DOWN))


def element_of(v: UnitTangent) -> MoebiusElement:
    """Inverse of tangent_of."""
    z = v.basepoint
    # h maps (i, down) to (z, down): z = x + iy, h(w) = y w + x
    h = normalize([[math.sqrt(z.imag), z.real / math.sqrt(z.imag)], [0.0, 1.0 / math.sqrt(z.imag)]])
    # then rotate at z by (direction - DOWN): conjugate of rotation at i
    alpha = wrap_angle(v.direction - DOWN)
    # rotation about i by angle alpha has derivative arg alpha at i
    rot = normalize([[math.cos(alpha / 2), math.sin(alpha / 2)], [-math.sin(alpha / 2), math.cos(alpha / 2)]])
    m = h @ rot
    return m.inverse()


def flow(t: float, v: UnitTangent) -> UnitTangent:
    return tangent_of(a_flow(t) @ element_of(v))


def left_act(g: MoebiusElement, v: UnitTangent) -> UnitTangent:
    """The vector represented by g * element_of(v)."""
    return tangent_of(g @ element_of(v))


def t1_distance(v1: UnitTangent, v2: UnitTangent) -> float:
    z, w = v1.basepoint, v2.basepoint
    d = hyperbolic_distance(z, w)
    if d == 0.0:
        return abs(wrap_angle(v1.direction - v2.direction))
    # isometry sending z to i and w onto the upper imaginary axis
    h = normalize([[1.0, -z.real], [0.0, z.imag]])  # z -> i
    w1 = h(w)
    # rotation about i taking w1 to the imaginary axis above i
    phi = _rotation_to_axis(w1)
    m = phi @ h
    a1 = wrap_angle(v1.direction + m.derivative_arg(z))
    a2 = wrap_angle(v2.direction + m.derivative_arg(w))
    # along the imaginary axis parallel transport keeps the angle with the vertical
    return d + abs(wrap_angle(a1 - a2))


def _rotation_to_axis(w: complex) -> MoebiusElement:
    """Elliptic element about i moving w onto the imaginary axis above i."""
    k = (w - 1j) / (w + 1j)
    theta = -float(np.angle(k))
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return normalize([[c, s], [-s, c]])


def twist_product(t: float, x: float, y: float) -> MoebiusElement:
    """a_{-t} u_x a_t n_y."""
    return a_flow(-t) @ u_elem(x) @ a_flow(t) @ n_elem(y)
