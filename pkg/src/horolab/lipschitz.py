"""McShane extension of 1-Lipschitz data on finite metric samples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NotLipschitz

LIP_TOL = 1e-12


def hyperbolic_metric(p, q):
    """Vectorized upper half-plane distance; broadcasts like numpy."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    return 2.0 * np.arcsinh(np.abs(p - q) / (2.0 * np.sqrt(p.imag * q.imag)))


def line_metric(p, q):
    return np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))


@dataclass
class PartialLipschitzFunction:
    domain: np.ndarray
    values: np.ndarray
    metric: Callable = hyperbolic_metric

    def __post_init__(self):
        self.domain = np.asarray(self.domain)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.domain) != len(self.values):
            raise ValueError("domain and values differ in length")

    def distance_matrix(self, queries=None) -> np.ndarray:
        q = self.domain if queries is None else np.asarray(queries)
        return self.metric(self.domain[:, None], q[None, :])


def _violation(f: PartialLipschitzFunction, block: int = 2048):
    """Largest f(p) - f(q) - d(p,q) over ordered pairs, with the pair."""
    n = len(f.values)
    best, pair = -np.inf, None
    for start in range(0, n, block):
        rows = slice(start, min(n, start + block))
        d = f.metric(f.domain[rows, None], f.domain[None, :])
        m = f.values[rows, None] - f.values[None, :] - d
        k = int(np.argmax(m))
        i, j = divmod(k, n)
        if m.flat[k] > best:
            best, pair = float(m.flat[k]), (start + i, j)
    return best, pair


def check_lipschitz(f: PartialLipschitzFunction, tol: float = LIP_TOL):
    """Returns (ok, worst pair or None, margin).

    margin is the largest value of f(p) - f(q) - d(p,q); it is <= 0 for valid data.
    """
    if len(f.values) < 2:
        return True, None, 0.0
    margin, pair = _violation(f)
    if margin > tol:
        return False, pair, margin
    return True, None, margin


def mcshane_extend(f: PartialLipschitzFunction, queries, check: bool = True, block: int = 4096):
    """Greatest 1-Lipschitz extension: v(w) = min_z f(z) + d(z, w)."""
    if check:
        ok, pair, margin = check_lipschitz(f)
        if not ok:
            raise NotLipschitz(f"pair {pair} violates by {margin:.3g}")
    queries = np.asarray(queries)
    out = np.empty(len(queries))
    for start in range(0, len(queries), block):
        q = queries[start : start + block]
        d = f.metric(f.domain[:, None], q[None, :])
        out[start : start + block] = np.min(f.values[:, None] + d, axis=0)
    # on domain points ties can round below f; restore exact values
    if f.domain.ndim != 1:
        return out
    index = {v: i for i, v in enumerate(f.domain.tolist())}
    for j, w in enumerate(queries.tolist()):
        i = index.get(w)
        if i is not None:
            out[j] = f.values[i]
    return out


def sup_extend(f: PartialLipschitzFunction, queries, block: int = 4096):
    """Least 1-Lipschitz extension: v(w) = max_z f(z) - d(z, w)."""
    queries = np.asarray(queries)
    out = np.empty(len(queries))
    for start in range(0, len(queries), block):
        q = queries[start : start + block]
        d = f.metric(f.domain[:, None], q[None, :])
        out[start : start + block] = np.max(f.values[:, None] - d, axis=0)
    return out


def lipschitz_margin(points, values, metric: Callable = hyperbolic_metric) -> float:
    """Largest |v(p) - v(q)| - d(p, q) over pairs of the given samples."""
    f = PartialLipschitzFunction(np.asarray(points), np.asarray(values), metric)
    return _violation(f)[0]


def random_alternative(f: PartialLipschitzFunction, queries, rng: np.random.Generator):
    """A random 1-Lipschitz extension: a convex mix of the inf and sup formulas."""
    hi = mcshane_extend(f, queries, check=False)
    lo = sup_extend(f, queries)
    lam = rng.uniform()
    return lam * hi + (1.0 - lam) * lo
