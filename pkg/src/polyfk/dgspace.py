"""Discontinuous polynomial space on a :class:`~polyfk.mesh.PolyMesh`.

On each element the basis is the tensor Legendre family on the element's
axis-aligned bounding box, restricted to total degree ``<= p`` and
normalized so that it is orthonormal over the box (not over the polygon).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .quadrature import QuadratureRule, map_segment, map_triangles, segment_rule, triangle_rule


def basis_exponents(p):
    """Legendre degree pairs ``(a, b)`` ordered by total degree."""
    return np.array([(d - b, b) for d in range(p + 1) for b in range(d + 1)], dtype=np.int64)


@dataclass(frozen=True)
class VolumeTable:
    """Padded element quadrature with basis values; padded slots have zero weight."""

    points: np.ndarray  # (nel, nq, 2)
    weights: np.ndarray  # (nel, nq)
    phi: np.ndarray  # (nel, nq, nloc)
    dphi: np.ndarray  # (nel, nq, nloc, 2)


@dataclass(frozen=True)
class FaceTable:
    """Face quadrature with traces from both sides (minus side zero on the boundary)."""

    points: np.ndarray  # (nf, nq, 2)
    weights: np.ndarray  # (nf, nq)
    phi_p: np.ndarray
    dphi_p: np.ndarray
    phi_m: np.ndarray
    dphi_m: np.ndarray


class DgSpace:
    """Uniform-degree discontinuous space with ``(p+1)(p+2)/2`` dofs per element."""

    def __init__(self, mesh, degree):
        if degree < 1:
            raise ValueError("degree must be >= 1")
        self.mesh = mesh
        self.degree = int(degree)
        self.exponents = basis_exponents(self.degree)
        self.n_local = len(self.exponents)
        self.n_dofs = mesh.n_elements * self.n_local
        self.dof_offset = np.arange(mesh.n_elements) * self.n_local
        bb = mesh.bboxes
        self._center = np.column_stack([0.5 * (bb[:, 0] + bb[:, 1]), 0.5 * (bb[:, 2] + bb[:, 3])])
        self._half = np.column_stack([0.5 * (bb[:, 1] - bb[:, 0]), 0.5 * (bb[:, 3] - bb[:, 2])])
        self._norm = 1.0 / np.sqrt(4.0 * self._half[:, 0] * self._half[:, 1])
        self._vol = {}
        self._face = {}

    @property
    def default_order(self):
        return 2 * self.degree + 2

    def dofs(self, e):
        o = self.dof_offset[e]
        return slice(o, o + self.n_local)

    def blocks(self, C):
        """View a global coefficient vector as ``(n_elements, n_local)``."""
        C = np.asarray(C, dtype=float)
        if C.shape != (self.n_dofs,):
            raise ValueError(f"coefficient vector has shape {C.shape}, expected ({self.n_dofs},)")
        return C.reshape(self.mesh.n_elements, self.n_local)

    # -- basis evaluation ---------------------------------------------------
    def _eval(self, elems, points):
        """Basis on ``points[..., 2]`` belonging to ``elems`` (broadcast over leading axes)."""
        elems = np.asarray(elems)
        c = self._center[elems]
        h = self._half[elems]
        s = self._norm[elems]
        xi = (points[..., 0] - c[..., 0][..., None]) / h[..., 0][..., None]
        et = (points[..., 1] - c[..., 1][..., None]) / h[..., 1][..., None]
        Px, dPx = kernels.legendre_table(xi, self.degree)
        Py, dPy = kernels.legendre_table(et, self.degree)
        a, b = self.exponents[:, 0], self.exponents[:, 1]
        s = s[..., None, None]
        phi = Px[..., a] * Py[..., b] * s
        gx = dPx[..., a] * Py[..., b] * s / h[..., 0][..., None, None]
        gy = Px[..., a] * dPy[..., b] * s / h[..., 1][..., None, None]
        return phi, np.stack([gx, gy], axis=-1)

    def eval_basis(self, element, points):
        """Values ``(npts, n_local)`` and gradients ``(npts, n_local, 2)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        phi, dphi = self._eval(np.array([element]), pts[None])
        return phi[0], dphi[0]

    def evaluate(self, C, element, points):
        phi, _ = self.eval_basis(element, points)
        return phi @ np.asarray(C)[self.dofs(element)]

    def evaluate_gradient(self, C, element, points):
        _, dphi = self.eval_basis(element, points)
        return np.einsum("qia,i->qa", dphi, np.asarray(C)[self.dofs(element)])

    def point_values(self, C, points, elements=None):
        """``c_h`` at arbitrary points; ``nan`` for points outside the mesh."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        el = self.mesh.locate(pts) if elements is None else np.asarray(elements)
        out = np.full(len(pts), np.nan)
        ok = el >= 0
        if ok.any():
            phi, _ = self._eval(el[ok], pts[ok][:, None, :])
            out[ok] = np.einsum("ei,ei->e", phi[:, 0, :], self.blocks(C)[el[ok]])
        return out

    # -- quadrature tables ----------------------------------------------------
    def volume_table(self, order=None):
        order = self.default_order if order is None else order
        tab = self._vol.get(order)
        if tab is not None:
            return tab
        mesh = self.mesh
        st = mesh.sub_triangulation
        rule = triangle_rule(order)
        pts_list, w_list = [], []
        for e in range(mesh.n_elements):
            p, w = map_triangles(st.triangles[e], rule)
            pts_list.append(p)
            w_list.append(w)
        nq = max(len(w) for w in w_list)
        nel = mesh.n_elements
        P = np.empty((nel, nq, 2))
        W = np.zeros((nel, nq))
        for e in range(nel):
            k = len(w_list[e])
            P[e, :k] = pts_list[e]
            P[e, k:] = pts_list[e][0]
            W[e, :k] = w_list[e]
        phi, dphi = self._eval(np.arange(nel), P)
        tab = VolumeTable(P, W, np.ascontiguousarray(phi), np.ascontiguousarray(dphi))
        self._vol[order] = tab
        return tab

    def face_table(self, order=None):
        order = self.default_order if order is None else order
        tab = self._face.get(order)
        if tab is not None:
            return tab
        mesh = self.mesh
        rule = segment_rule(order)
        V = mesh.vertices
        fv = mesh.face_vertices
        p0, p1 = V[fv[:, 0]], V[fv[:, 1]]
        P = p0[:, None, :] + rule.points[None, :, None] * (p1 - p0)[:, None, :]
        W = mesh.face_lengths[:, None] * rule.weights[None, :]
        fe = mesh.face_elements
        phi_p, dphi_p = self._eval(fe[:, 0], P)
        minus = np.where(fe[:, 1] >= 0, fe[:, 1], fe[:, 0])
        phi_m, dphi_m = self._eval(minus, P)
        bnd = fe[:, 1] < 0
        phi_m[bnd] = 0.0
        dphi_m[bnd] = 0.0
        tab = FaceTable(
            P,
            np.ascontiguousarray(W),
            np.ascontiguousarray(phi_p),
            np.ascontiguousarray(dphi_p),
            np.ascontiguousarray(phi_m),
            np.ascontiguousarray(dphi_m),
        )
        self._face[order] = tab
        return tab

    def element_mean_weights(self):
        """``(n_elements, n_local)`` with ``mean_K(c_h) = row . C_K``."""
        tab = self.volume_table()
        ints = np.einsum("eq,eqi->ei", tab.weights, tab.phi)
        return ints / self.mesh.areas[:, None]

    def element_means(self, C):
        return np.einsum("ei,ei->e", self.element_mean_weights(), self.blocks(C))

    def at_quadrature(self, C, order=None):
        """Values of ``c_h`` at the padded volume quadrature points."""
        tab = self.volume_table(order)
        return kernels.eval_at_points(tab.phi, np.ascontiguousarray(self.blocks(C)))


def eval_basis(space, element, point):
    """Basis values and gradients of ``element`` at one or more points."""
    return space.eval_basis(element, point)


def element_quadrature(mesh, sub_triangulation, element, order):
    """Composite triangle rule over the element's sub-triangles (physical coordinates)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    pts, w = map_triangles(sub_triangulation.triangles[element], triangle_rule(order))
    return QuadratureRule(pts, w)


def face_quadrature(face, order, vertices=None):
    """Gauss-Legendre rule on a face segment; weights sum to the face length.

    ``face`` is either a :class:`~polyfk.mesh.Face` together with the mesh
    vertex array, or an explicit pair of endpoints.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if vertices is not None:
        p0, p1 = vertices[face.vertices[0]], vertices[face.vertices[1]]
    else:
        p0, p1 = face
    pts, w = map_segment(p0, p1, segment_rule(order))
    return QuadratureRule(pts, w)
