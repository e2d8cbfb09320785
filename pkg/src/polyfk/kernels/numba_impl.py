"""Numba-compiled twins of :mod:`polyfk.kernels.numpy_impl`.

Element and face loops run under ``prange``; each iteration writes a
disjoint output block, so results do not depend on the thread count.
"""
import os

import numpy as np
from numba import config, njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ:
    config.THREADING_LAYER = "workqueue"


@njit(cache=True)
def _legendre_flat(x, p):
    n = x.shape[0]
    P = np.empty((n, p + 1))
    dP = np.empty((n, p + 1))
    for k in range(n):
        P[k, 0] = 1.0
        dP[k, 0] = 0.0
        if p >= 1:
            P[k, 1] = x[k]
            dP[k, 1] = 1.0
        for m in range(1, p):
            P[k, m + 1] = ((2 * m + 1) * x[k] * P[k, m] - m * P[k, m - 1]) / (m + 1)
            dP[k, m + 1] = dP[k, m - 1] + (2 * m + 1) * P[k, m]
        for m in range(p + 1):
            s = np.sqrt(2.0 * m + 1.0)
            P[k, m] *= s
            dP[k, m] *= s
    return P, dP


def legendre_table(x, p):
    x = np.asarray(x, dtype=float)
    P, dP = _legendre_flat(np.ascontiguousarray(x.reshape(-1)), p)
    return P.reshape(x.shape + (p + 1,)), dP.reshape(x.shape + (p + 1,))


@njit(parallel=True, cache=True)
def weighted_mass_blocks(w, phi):
    nel, nq, nloc = phi.shape
    B = np.zeros((nel, nloc, nloc))
    for e in prange(nel):
        for q in range(nq):
            wq = w[e, q]
            if wq == 0.0:
                continue
            for i in range(nloc):
                a = wq * phi[e, q, i]
                for j in range(i, nloc):
                    B[e, i, j] += a * phi[e, q, j]
        for i in range(nloc):
            for j in range(i + 1, nloc):
                B[e, j, i] = B[e, i, j]
    return B


@njit(parallel=True, cache=True)
def stiffness_blocks(w, dphi, D):
    nel, nq, nloc, _ = dphi.shape
    B = np.zeros((nel, nloc, nloc))
    for e in prange(nel):
        for q in range(nq):
            wq = w[e, q]
            if wq == 0.0:
                continue
            d00 = D[e, q, 0, 0]
            d01 = D[e, q, 0, 1]
            d10 = D[e, q, 1, 0]
            d11 = D[e, q, 1, 1]
            for j in range(nloc):
                gx = d00 * dphi[e, q, j, 0] + d01 * dphi[e, q, j, 1]
                gy = d10 * dphi[e, q, j, 0] + d11 * dphi[e, q, j, 1]
                for i in range(nloc):
                    B[e, i, j] += wq * (dphi[e, q, i, 0] * gx + dphi[e, q, i, 1] * gy)
    return B


@njit(parallel=True, cache=True)
def face_blocks(w, phip, dphip, phim, dphim, Dnp, Dnm, eta, interior):
    nf, nq, nloc = phip.shape
    B = np.zeros((nf, 2, 2, nloc, nloc))
    for f in prange(nf):
        inner = interior[f]
        theta = 0.5 if inner else 1.0
        ns = 2 if inner else 1
        phis = np.empty((2, nloc))
        gs = np.empty((2, nloc))
        for q in range(nq):
            wq = w[f, q]
            for k in range(nloc):
                phis[0, k] = phip[f, q, k]
                gs[0, k] = dphip[f, q, k, 0] * Dnp[f, q, 0] + dphip[f, q, k, 1] * Dnp[f, q, 1]
                if inner:
                    phis[1, k] = -phim[f, q, k]
                    gs[1, k] = dphim[f, q, k, 0] * Dnm[f, q, 0] + dphim[f, q, k, 1] * Dnm[f, q, 1]
            for s in range(ns):
                for r in range(ns):
                    for i in range(nloc):
                        for j in range(nloc):
                            B[f, s, r, i, j] += wq * (
                                eta[f] * phis[s, i] * phis[r, j]
                                - theta * phis[s, i] * gs[r, j]
                                - theta * phis[r, j] * gs[s, i]
                            )
    return B


@njit(parallel=True, cache=True)
def eval_at_points(phi, coeffs):
    nel, nq, nloc = phi.shape
    u = np.zeros((nel, nq))
    for e in prange(nel):
        for q in range(nq):
            acc = 0.0
            for i in range(nloc):
                acc += phi[e, q, i] * coeffs[e, i]
            u[e, q] = acc
    return u


@njit(parallel=True, cache=True)
def _block_matvec(blocks, x):
    nel, nloc, _ = blocks.shape
    y = np.empty(nel * nloc)
    for e in prange(nel):
        o = e * nloc
        for i in range(nloc):
            acc = 0.0
            for j in range(nloc):
                acc += blocks[e, i, j] * x[o + j]
            y[o + i] = acc
    return y


def block_matvec(blocks, x):
    return _block_matvec(blocks, np.ascontiguousarray(x, dtype=float))


@njit(cache=True)
def _clip_into(src, ns, dst, a, b, c, eps):
    m = 0
    cap = dst.shape[0]
    for i in range(ns):
        j = (i + 1) % ns
        px = src[i, 0]
        py = src[i, 1]
        qx = src[j, 0]
        qy = src[j, 1]
        dP = a * px + b * py - c
        dQ = a * qx + b * qy - c
        if dP <= eps and m < cap:
            dst[m, 0] = px
            dst[m, 1] = py
            m += 1
        if ((dP < -eps and dQ > eps) or (dP > eps and dQ < -eps)) and m < cap:
            s = dP / (dP - dQ)
            dst[m, 0] = px + s * (qx - px)
            dst[m, 1] = py + s * (qy - py)
            m += 1
    return m


@njit(parallel=True, cache=True)
def _clip_cells(points, nbr_ptr, nbr_idx, rect, eps, maxv):
    n = points.shape[0]
    verts = np.zeros((n, maxv, 2))
    counts = np.zeros(n, dtype=np.int64)
    for i in prange(n):
        A = np.empty((maxv, 2))
        Bf = np.empty((maxv, 2))
        A[0, 0] = rect[0]
        A[0, 1] = rect[2]
        A[1, 0] = rect[1]
        A[1, 1] = rect[2]
        A[2, 0] = rect[1]
        A[2, 1] = rect[3]
        A[3, 0] = rect[0]
        A[3, 1] = rect[3]
        m = 4
        for k in range(nbr_ptr[i], nbr_ptr[i + 1]):
            j = nbr_idx[k]
            a = points[j, 0] - points[i, 0]
            b = points[j, 1] - points[i, 1]
            c = 0.5 * (a * (points[i, 0] + points[j, 0]) + b * (points[i, 1] + points[j, 1]))
            m = _clip_into(A, m, Bf, a, b, c, eps * (abs(a) + abs(b)))
            for r in range(m):
                A[r, 0] = Bf[r, 0]
                A[r, 1] = Bf[r, 1]
            if m == 0:
                break
        counts[i] = m
        for r in range(m):
            verts[i, r, 0] = A[r, 0]
            verts[i, r, 1] = A[r, 1]
    return verts, counts


def clip_voronoi_cells(points, nbr_ptr, nbr_idx, rect, eps):
    n = points.shape[0]
    maxdeg = int(np.max(np.diff(nbr_ptr))) if n > 0 else 0
    return _clip_cells(
        np.ascontiguousarray(points, dtype=float),
        np.asarray(nbr_ptr, dtype=np.int64),
        np.asarray(nbr_idx, dtype=np.int64),
        np.asarray(rect, dtype=float),
        float(eps),
        4 + maxdeg,
    )
