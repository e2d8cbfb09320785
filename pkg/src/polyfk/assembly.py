"""Sparse SIPG operators and load vectors.

Element and face contributions are computed as dense local blocks by the
kernels in :mod:`polyfk.kernels` and merged into CSR matrices. Faces are
processed with the plus-side normal; interior faces get the penalty
``eta0 p^2 / {h}_H`` and Dirichlet faces ``eta0 p^2 / h_K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import ContractError
from .mesh import DIRICHLET, INTERIOR, KIND_NAMES, NEUMANN

_KD = KIND_NAMES.index(DIRICHLET)
_KN = KIND_NAMES.index(NEUMANN)


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty scaling ``eta0`` (dimensionless, must be positive)."""

    eta0: float = 10.0

    def __post_init__(self):
        if not self.eta0 > 0:
            raise ContractError(f"eta0 must be positive, got {self.eta0}")


def penalty(face, space, spec):
    """Penalty value on one :class:`~polyfk.mesh.Face`."""
    h = space.mesh.element_diameters
    p2 = space.degree**2
    if face.kind == INTERIOR:
        a, b = face.elements
        hH = 2.0 * h[a] * h[b] / (h[a] + h[b])
        return spec.eta0 * p2 / hH
    if face.kind == DIRICHLET:
        return spec.eta0 * p2 / h[face.elements[0]]
    raise ContractError(f"no penalty is defined on {face.kind} faces")


def face_penalties(space, spec):
    """Penalty for every face; Neumann faces get 0 (they carry no penalty term)."""
    mesh = space.mesh
    h = mesh.element_diameters
    fe = mesh.face_elements
    hp = h[fe[:, 0]]
    hm = np.where(fe[:, 1] >= 0, h[np.maximum(fe[:, 1], 0)], hp)
    hH = np.where(fe[:, 1] >= 0, 2.0 * hp * hm / (hp + hm), hp)
    eta = spec.eta0 * space.degree**2 / hH
    eta[mesh.face_kind == _KN] = 0.0
    return eta


# -- helpers ----------------------------------------------------------------
def block_diagonal(blocks):
    """CSR matrix from ``(nel, nloc, nloc)`` diagonal blocks."""
    nel, nloc, _ = blocks.shape
    bsr = sp.bsr_matrix((np.ascontiguousarray(blocks), np.arange(nel), np.arange(nel + 1)), shape=(nel * nloc,) * 2)
    return bsr.tocsr()


def _face_pairs(space, faces, B):
    """Scatter face blocks ``B[k, s, r]`` of ``faces`` into COO triplets."""
    mesh = space.mesh
    nloc = space.n_local
    fe = mesh.face_elements[faces]
    li = np.arange(nloc)
    rows, cols, vals = [], [], []
    for s in range(2):
        for r in range(2):
            sel = np.ones(len(faces), bool) if s == r == 0 else fe[:, 1] >= 0
            if not sel.any():
                continue
            es = fe[sel, s]
            er = fe[sel, r]
            I = (es * nloc)[:, None, None] + li[None, :, None]
            J = (er * nloc)[:, None, None] + li[None, None, :]
            rows.append(np.broadcast_to(I, (len(es), nloc, nloc)).ravel())
            cols.append(np.broadcast_to(J, (len(es), nloc, nloc)).ravel())
            vals.append(B[sel, s, r].ravel())
    if not rows:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _volume_diffusion(space, params, t, order):
    tab = space.volume_table(order)
    nel = space.mesh.n_elements
    elem = np.broadcast_to(np.arange(nel)[:, None], tab.weights.shape)
    return tab, params.diffusion(tab.points[..., 0], tab.points[..., 1], t, elem)


def _penalized_faces(mesh):
    return np.flatnonzero(mesh.face_kind != _KN)


# -- operators --------------------------------------------------------------
def mass_blocks(space, order=None):
    tab = space.volume_table(order)
    return kernels.weighted_mass_blocks(tab.weights, tab.phi)


def assemble_mass(space, order=None):
    """Block-diagonal mass matrix ``(phi_j, phi_i)``."""
    return block_diagonal(mass_blocks(space, order))


def reaction_weights(space, params, t=0.0, order=None):
    """Quadrature weights multiplied by ``alpha`` at the volume points."""
    tab = space.volume_table(order)
    nel = space.mesh.n_elements
    elem = np.broadcast_to(np.arange(nel)[:, None], tab.weights.shape)
    return tab.weights * params.alpha(tab.points[..., 0], tab.points[..., 1], t, elem)


def assemble_linear_reaction(space, params, order=None, t=0.0):
    """Block-diagonal ``(alpha phi_j, phi_i)``."""
    tab = space.volume_table(order)
    return block_diagonal(kernels.weighted_mass_blocks(reaction_weights(space, params, t, order), tab.phi))


def nonlinear_blocks(space, alpha_weights, C_star, order=None):
    """Diagonal blocks of ``(alpha c* phi_j, phi_i)`` given precomputed ``alpha_weights``."""
    tab = space.volume_table(order)
    cq = kernels.eval_at_points(tab.phi, np.ascontiguousarray(space.blocks(C_star)))
    return kernels.weighted_mass_blocks(alpha_weights * cq, tab.phi)


def assemble_nonlinear_reaction(space, params, C_star, order=None, t=0.0):
    """Block-diagonal ``(alpha c*_h phi_j, phi_i)``; linear in ``C_star``."""
    if np.shape(C_star) != (space.n_dofs,):
        raise ContractError(f"C_star has shape {np.shape(C_star)}, expected ({space.n_dofs},)")
    return block_diagonal(nonlinear_blocks(space, reaction_weights(space, params, t, order), C_star, order))


def _face_data(space, params, t, order, faces):
    mesh = space.mesh
    tab = space.face_table(order)
    fe = mesh.face_elements[faces]
    pts = tab.points[faces]
    n = mesh.face_normals[faces]
    ep = np.broadcast_to(fe[:, :1], pts.shape[:2])
    em = np.broadcast_to(np.where(fe[:, 1:] >= 0, fe[:, 1:], fe[:, :1]), pts.shape[:2])
    Dp = params.diffusion(pts[..., 0], pts[..., 1], t, ep)
    Dm = params.diffusion(pts[..., 0], pts[..., 1], t, em)
    Dnp = np.einsum("fqab,fb->fqa", Dp, n)
    Dnm = np.einsum("fqab,fb->fqa", Dm, n)
    return tab, Dnp, Dnm


def stiffness_matrix(space, params, spec, t=0.0, order=None):
    """SIPG diffusion matrix without the Dirichlet data load."""
    mesh = space.mesh
    n = space.n_dofs
    vtab, D = _volume_diffusion(space, params, t, order)
    K = block_diagonal(kernels.stiffness_blocks(vtab.weights, vtab.dphi, np.ascontiguousarray(D)))
    faces = _penalized_faces(mesh)
    if len(faces) == 0:
        return K
    ftab, Dnp, Dnm = _face_data(space, params, t, order, faces)
    eta = face_penalties(space, spec)[faces]
    B = kernels.face_blocks(
        np.ascontiguousarray(ftab.weights[faces]),
        np.ascontiguousarray(ftab.phi_p[faces]),
        np.ascontiguousarray(ftab.dphi_p[faces]),
        np.ascontiguousarray(ftab.phi_m[faces]),
        np.ascontiguousarray(ftab.dphi_m[faces]),
        np.ascontiguousarray(Dnp),
        np.ascontiguousarray(Dnm),
        np.ascontiguousarray(eta),
        mesh.face_elements[faces, 1] >= 0,
    )
    r, c, v = _face_pairs(space, faces, B)
    F = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    return (K + F).tocsr()


def dirichlet_load(space, params, spec, t=0.0, order=None):
    """Lifting of non-homogeneous Dirichlet data: ``int_F (eta g w - g D grad(w) . n)``."""
    mesh = space.mesh
    F = np.zeros((mesh.n_elements, space.n_local))
    faces = np.flatnonzero(mesh.face_kind == _KD)
    if len(faces) == 0 or params.dirichlet.is_zero:
        return F.ravel()
    ftab, Dnp, _ = _face_data(space, params, t, order, faces)
    pts = ftab.points[faces]
    e = mesh.face_elements[faces, 0]
    g = params.dirichlet(pts[..., 0], pts[..., 1], t, np.broadcast_to(e[:, None], pts.shape[:2]))
    eta = face_penalties(space, spec)[faces]
    wg = ftab.weights[faces] * g
    gw = np.einsum("fqka,fqa->fqk", ftab.dphi_p[faces], Dnp)
    contrib = np.einsum("fq,fqk->fk", wg * eta[:, None], ftab.phi_p[faces]) - np.einsum("fq,fqk->fk", wg, gw)
    np.add.at(F, e, contrib)
    return F.ravel()


def assemble_stiffness(space, params, spec, t=0.0, order=None):
    """Return ``(A, F_D)``: the SIPG matrix and the Dirichlet data load at time ``t``."""
    return stiffness_matrix(space, params, spec, t, order), dirichlet_load(space, params, spec, t, order)


def forcing_load(space, params, t=0.0, order=None):
    tab = space.volume_table(order)
    nel = space.mesh.n_elements
    if params.forcing.is_zero:
        return np.zeros(space.n_dofs)
    elem = np.broadcast_to(np.arange(nel)[:, None], tab.weights.shape)
    f = params.forcing(tab.points[..., 0], tab.points[..., 1], t, elem)
    return np.einsum("eq,eqi->ei", tab.weights * f, tab.phi).ravel()


def neumann_load(space, params, t=0.0, order=None):
    mesh = space.mesh
    F = np.zeros((mesh.n_elements, space.n_local))
    faces = np.flatnonzero(mesh.face_kind == _KN)
    if len(faces) == 0 or params.neumann.is_zero:
        return F.ravel()
    tab = space.face_table(order)
    pts = tab.points[faces]
    e = mesh.face_elements[faces, 0]
    g = params.neumann(pts[..., 0], pts[..., 1], t, np.broadcast_to(e[:, None], pts.shape[:2]))
    np.add.at(F, e, np.einsum("fq,fqk->fk", tab.weights[faces] * g, tab.phi_p[faces]))
    return F.ravel()


def assemble_load(space, params, t=0.0, order=None, spec=None):
    """Right-hand side ``F(t)``: forcing, Neumann flux and Dirichlet lifting.

    ``spec`` is required only when the mesh has Dirichlet faces with
    non-zero data.
    """
    F = forcing_load(space, params, t, order) + neumann_load(space, params, t, order)
    if (space.mesh.face_kind == _KD).any() and not params.dirichlet.is_zero:
        if spec is None:
            raise ContractError("a PenaltySpec is needed for non-homogeneous Dirichlet data")
        F = F + dirichlet_load(space, params, spec, t, order)
    return F


def project_l2(space, g, order=None, t=0.0):
    """Element-local L2 projection of the scalar field ``g``."""
    tab = space.volume_table(order)
    nel = space.mesh.n_elements
    elem = np.broadcast_to(np.arange(nel)[:, None], tab.weights.shape)
    vals = g(tab.points[..., 0], tab.points[..., 1], t, elem)
    rhs = np.einsum("eq,eqi->ei", tab.weights * vals, tab.phi)
    M = kernels.weighted_mass_blocks(tab.weights, tab.phi)
    return np.linalg.solve(M, rhs[..., None])[..., 0].ravel()


# -- audits and dumps --------------------------------------------------------
def symmetry_defect(A):
    """``max |A - A^T| / max |A|`` (0 for the zero matrix)."""
    A = sp.csr_matrix(A)
    scale = abs(A).max() if A.nnz else 0.0
    if scale == 0:
        return 0.0
    D = A - A.T
    return (abs(D).max() if D.nnz else 0.0) / scale


def audit_symmetry(A, tol=1e-12, name="operator"):
    d = symmetry_defect(A)
    if d > tol:
        raise ContractError(f"{name} fails the symmetry audit: relative defect {d:.3e} > {tol:.1e}")
    return d


def coupling_is_local(space, A):
    """True when every nonzero couples the same or face-adjacent elements."""
    A = sp.coo_matrix(A)
    ei = A.row // space.n_local
    ej = A.col // space.n_local
    adj = space.mesh.adjacency().tocsr() + sp.identity(space.mesh.n_elements, format="csr")
    return bool(np.all(np.asarray(adj[ei, ej]).ravel() != 0))


def dump_coo(A, path):
    """Write ``i j value`` lines (0-based) in row-major order."""
    A = sp.coo_matrix(sp.csr_matrix(A))
    order = np.lexsort((A.col, A.row))
    with open(path, "w") as fh:
        for i, j, v in zip(A.row[order], A.col[order], A.data[order]):
            fh.write(f"{i} {j} {float(v)!r}\n")


def load_coo(path, n):
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))


@dataclass
class Operators:
    """Time-frozen operators of the semi-discrete system at one time level."""

    M: sp.csr_matrix
    A: sp.csr_matrix
    M_alpha: sp.csr_matrix
    alpha_weights: np.ndarray
    t: float


def assemble_operators(space, params, spec, t=0.0, order=None):
    return Operators(
        M=assemble_mass(space, order),
        A=stiffness_matrix(space, params, spec, t, order),
        M_alpha=assemble_linear_reaction(space, params, order, t),
        alpha_weights=reaction_weights(space, params, t, order),
        t=t,
    )
