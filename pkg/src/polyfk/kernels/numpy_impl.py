"""Pure-numpy implementations of the hot numeric kernels.

Every function here has a twin with the same signature in
:mod:`polyfk.kernels.numba_impl`. Padded quadrature arrays carry zero
weights on unused slots, so no masking is needed.
"""
import numpy as np


def legendre_table(x, p):
    """Normalized Legendre values and derivatives on [-1, 1].

    Returns ``(P, dP)`` of shape ``x.shape + (p + 1,)`` where
    ``P[..., a] = sqrt(2a + 1) L_a(x)``.
    """
    x = np.asarray(x, dtype=float)
    P = np.empty(x.shape + (p + 1,))
    dP = np.empty(x.shape + (p + 1,))
    P[..., 0] = 1.0
    dP[..., 0] = 0.0
    if p >= 1:
        P[..., 1] = x
        dP[..., 1] = 1.0
    for n in range(1, p):
        P[..., n + 1] = ((2 * n + 1) * x * P[..., n] - n * P[..., n - 1]) / (n + 1)
        dP[..., n + 1] = dP[..., n - 1] + (2 * n + 1) * P[..., n]
    scale = np.sqrt(2.0 * np.arange(p + 1) + 1.0)
    return P * scale, dP * scale


def weighted_mass_blocks(w, phi):
    """``B[e, i, j] = sum_q w[e, q] phi[e, q, i] phi[e, q, j]``."""
    return np.einsum("eq,eqi,eqj->eij", w, phi, phi, optimize=True)


def stiffness_blocks(w, dphi, D):
    """``B[e, i, j] = sum_q w grad(phi_i) . D grad(phi_j)``."""
    Ddphi = np.einsum("eqab,eqjb->eqja", D, dphi, optimize=True)
    return np.einsum("eq,eqia,eqja->eij", w, dphi, Ddphi, optimize=True)


def face_blocks(w, phip, dphip, phim, dphim, Dnp, Dnm, eta, interior):
    """Symmetric interior penalty blocks for every face.

    Returns ``B`` of shape ``(nf, 2, 2, nloc, nloc)`` where ``B[f, s, r]``
    couples test side ``s`` with trial side ``r`` (0 = plus, 1 = minus).
    Boundary faces only fill ``B[f, 0, 0]``.
    """
    nf, nq, nloc = phip.shape
    theta = np.where(interior, 0.5, 1.0)
    gp = np.einsum("fqka,fqa->fqk", dphip, Dnp)
    gm = np.einsum("fqka,fqa->fqk", dphim, Dnm)
    phis = (phip, -phim)
    gs = (gp, gm)
    B = np.zeros((nf, 2, 2, nloc, nloc))
    we = w * eta[:, None]
    wt = w * theta[:, None]
    for s in range(2):
        for r in range(2):
            blk = np.einsum("fq,fqi,fqj->fij", we, phis[s], phis[r])
            blk -= np.einsum("fq,fqi,fqj->fij", wt, phis[s], gs[r])
            blk -= np.einsum("fq,fqj,fqi->fij", wt, phis[r], gs[s])
            if s == 0 and r == 0:
                B[:, 0, 0] = blk
            else:
                B[interior, s, r] = blk[interior]
    return B


def eval_at_points(phi, coeffs):
    """``u[e, q] = sum_i phi[e, q, i] coeffs[e, i]``."""
    return np.einsum("eqi,ei->eq", phi, coeffs)


def block_matvec(blocks, x):
    """Apply a block-diagonal operator stored as ``(nel, nloc, nloc)``."""
    nel, nloc, _ = blocks.shape
    return np.einsum("eij,ej->ei", blocks, x.reshape(nel, nloc)).reshape(-1)


def _clip(poly, a, b, c, eps):
    # keep the side a*x + b*y <= c
    out = []
    k = len(poly)
    for i in range(k):
        P = poly[i]
        Q = poly[(i + 1) % k]
        dP = a * P[0] + b * P[1] - c
        dQ = a * Q[0] + b * Q[1] - c
        if dP <= eps:
            out.append(P)
        if (dP < -eps and dQ > eps) or (dP > eps and dQ < -eps):
            s = dP / (dP - dQ)
            out.append((P[0] + s * (Q[0] - P[0]), P[1] + s * (Q[1] - P[1])))
    return out


def clip_voronoi_cells(points, nbr_ptr, nbr_idx, rect, eps):
    """Clip the rectangle by the bisector half-planes of every seed.

    Returns ``(verts, counts)`` with ``verts`` of shape
    ``(n, maxv, 2)``; cell ``i`` is ``verts[i, :counts[i]]`` (CCW).
    """
    n = points.shape[0]
    x0, x1, y0, y1 = rect
    maxdeg = int(np.max(np.diff(nbr_ptr))) if n > 0 else 0
    maxv = 4 + maxdeg
    verts = np.zeros((n, maxv, 2))
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        poly = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        pi = points[i]
        for k in range(nbr_ptr[i], nbr_ptr[i + 1]):
            pj = points[nbr_idx[k]]
            a = pj[0] - pi[0]
            b = pj[1] - pi[1]
            c = 0.5 * (a * (pi[0] + pj[0]) + b * (pi[1] + pj[1]))
            poly = _clip(poly, a, b, c, eps * (abs(a) + abs(b)))
            if not poly:
                break
        counts[i] = len(poly)
        for m, P in enumerate(poly):
            verts[i, m] = P
    return verts, counts
