"""Gauss rules on the unit interval and the reference triangle.

Triangle rules are collapsed (Duffy) products of Gauss-Jacobi and
Gauss-Legendre points; every rule is checked against exact monomial
integrals the first time it is built.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.weights)


def _npts(order):
    return max(1, (order + 2) // 2)


@lru_cache(maxsize=None)
def segment_rule(order):
    """Gauss-Legendre rule on [0, 1] exact for polynomials of degree ``order``."""
    if order < 0:
        raise ValueError("order must be >= 0")
    x, w = np.polynomial.legendre.leggauss(_npts(order))
    pts, wts = 0.5 * (x + 1.0), 0.5 * w
    for k in range(order + 1):
        err = abs(np.dot(wts, pts**k) - 1.0 / (k + 1))
        if err > 1e-13:
            raise AssertionError(f"segment rule of order {order} fails on x^{k} ({err:.2e})")
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(pts, wts)


@lru_cache(maxsize=None)
def triangle_rule(order):
    """Rule on the triangle (0,0), (1,0), (0,1); weights sum to 1/2."""
    if order < 0:
        raise ValueError("order must be >= 0")
    n = _npts(order)
    # collapsed coordinate u carries the (1 - u) Jacobian as a Jacobi weight
    u, wu = roots_jacobi(n, 1.0, 0.0)
    v, wv = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (u + 1.0)
    wu = wu / 4.0
    v = 0.5 * (v + 1.0)
    wv = wv / 2.0
    U, Vv = np.meshgrid(u, v, indexing="ij")
    x = U.ravel()
    y = ((1.0 - U) * Vv).ravel()
    w = np.outer(wu, wv).ravel()
    pts = np.column_stack([x, y])
    for a in range(order + 1):
        for b in range(order + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            err = abs(np.dot(w, x**a * y**b) - exact)
            if err > 1e-14:
                raise AssertionError(f"triangle rule of order {order} fails on x^{a} y^{b} ({err:.2e})")
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(pts, w)


def map_triangles(triangles, rule):
    """Push a reference rule onto physical triangles.

    ``triangles`` has shape (nt, 3, 2). Returns points (nt * nq, 2) and
    weights (nt * nq,) scaled by each triangle's Jacobian.
    """
    T = np.asarray(triangles)
    a = T[:, 1] - T[:, 0]
    b = T[:, 2] - T[:, 0]
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    r, s = rule.points[:, 0], rule.points[:, 1]
    pts = T[:, None, 0, :] + r[None, :, None] * a[:, None, :] + s[None, :, None] * b[:, None, :]
    w = det[:, None] * rule.weights[None, :]
    return pts.reshape(-1, 2), w.reshape(-1)


def map_segment(p0, p1, rule):
    """Points and weights of ``rule`` on the segment ``p0 -> p1``."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    L = float(np.hypot(*(p1 - p0)))
    pts = p0[None, :] + rule.points[:, None] * (p1 - p0)[None, :]
    return pts, rule.weights * L
