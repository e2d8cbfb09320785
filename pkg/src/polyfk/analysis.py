"""Norms, errors, convergence rates and activation/region post-processing."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assembly import face_penalties
from .errors import ContractError
from .mesh import DIRICHLET, KIND_NAMES, NEUMANN

_KD = KIND_NAMES.index(DIRICHLET)
_KN = KIND_NAMES.index(NEUMANN)


@dataclass(frozen=True)
class NormReport:
    l2: float
    dg: float
    energy: float
    t: float


def _elem_ids(shape, nel):
    return np.broadcast_to(np.arange(nel)[:, None], shape)


def _broken_grad(space, C, order=None):
    tab = space.volume_table(order)
    Cb = space.blocks(C)
    return tab, np.einsum("eqia,ei->eqa", tab.dphi, Cb)


def _dg_parts(space, params, spec, C, t=0.0, exact=None, grad=None, order=None):
    """Volume and jump contributions (both already square-rooted)."""
    mesh = space.mesh
    tab, g = _broken_grad(space, C, order)
    px, py = tab.points[..., 0], tab.points[..., 1]
    if grad is not None:
        g = g - grad(px, py, t)
    D = params.diffusion(px, py, t, _elem_ids(tab.weights.shape, mesh.n_elements))
    vol = float(np.sum(tab.weights * np.einsum("eqa,eqab,eqb->eq", g, D, g)))

    faces = np.flatnonzero(mesh.face_kind != _KN)
    jump = 0.0
    if len(faces):
        ftab = space.face_table(order)
        fe = mesh.face_elements[faces]
        Cb = space.blocks(C)
        up = np.einsum("fqi,fi->fq", ftab.phi_p[faces], Cb[fe[:, 0]])
        um = np.einsum("fqi,fi->fq", ftab.phi_m[faces], Cb[np.maximum(fe[:, 1], 0)])
        j = up - um
        if exact is not None:
            bnd = fe[:, 1] < 0
            pts = ftab.points[faces][bnd]
            j[bnd] -= exact(pts[..., 0], pts[..., 1], t)
        eta = face_penalties(space, spec)[faces]
        jump = float(np.sum(eta[:, None] * ftab.weights[faces] * j * j))
    return math.sqrt(max(vol, 0.0)), math.sqrt(max(jump, 0.0))


def dg_norm(space, params, spec, C, t=0.0, order=None):
    """``||sqrt(D) grad_h c|| + ||sqrt(eta) [[c]]||`` over interior and Dirichlet faces."""
    a, b = _dg_parts(space, params, spec, C, t, order=order)
    return a + b


def dg_error(space, params, spec, C, exact, grad, t, order=None):
    """DG norm of ``c_h - c``; on Dirichlet faces the jump is ``c_h - c``."""
    a, b = _dg_parts(space, params, spec, C, t, exact, grad, order)
    return a + b


def l2_error(space, C, exact, t=0.0, order=None):
    """``sqrt(int (c_h - c)^2)`` with ``exact(x, y, t)``."""
    tab = space.volume_table(order)
    uh = kernels.eval_at_points(tab.phi, np.ascontiguousarray(space.blocks(C)))
    ue = exact(tab.points[..., 0], tab.points[..., 1], t)
    return math.sqrt(float(np.sum(tab.weights * (uh - ue) ** 2)))


def l2_norm(space, C, order=None):
    return l2_error(space, C, lambda x, y, t: np.zeros_like(x), 0.0, order)


def energy_error(trajectory, exact, order=None):
    """``sqrt(||e(T)||^2 + int_0^T ||e||_DG^2 dt)`` from a trajectory that tracked the error integrand."""
    if not trajectory.error_integrand:
        raise ContractError("trajectory was integrated without an error integrand")
    space = trajectory.space
    C = trajectory.final_state
    if C is None or np.shape(C) != (space.n_dofs,):
        raise ContractError("trajectory state does not match its space")
    e2 = l2_error(space, C, exact, trajectory.final_time, order) ** 2
    return math.sqrt(e2 + trajectory.dg_integral)


def norm_report(trajectory, params, spec, exact, grad):
    space = trajectory.space
    t = trajectory.final_time
    C = trajectory.final_state
    return NormReport(
        l2=l2_error(space, C, exact, t),
        dg=dg_error(space, params, spec, C, exact, grad, t),
        energy=energy_error(trajectory, exact),
        t=t,
    )


# -- convergence -------------------------------------------------------------
@dataclass
class RateTable:
    """Refinement table; ``h`` holds mesh sizes (or degrees for p-refinement)."""

    h: list
    ndofs: list
    errors: list
    rates: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    label: str = ""

    def rows(self):
        return list(zip(self.h, self.ndofs, self.errors, [math.nan] + list(self.rates)))


def convergence_rates(h, errors):
    """Slopes ``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` between consecutive rows.

    Rows with zero (or non-finite) error are dropped; ``nan`` is returned for
    a pair that touches a dropped row.
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) < 2 or len(h) != len(e):
        raise ContractError("need at least two rows of equal length")
    ok = (e > 0) & np.isfinite(e)
    rates = []
    for i in range(len(h) - 1):
        if ok[i] and ok[i + 1]:
            rates.append(float(np.log(e[i] / e[i + 1]) / np.log(h[i] / h[i + 1])))
        else:
            rates.append(math.nan)
    return rates


def make_rate_table(h, ndofs, errors, label=""):
    rates = convergence_rates(h, errors)
    notes = [f"row {i} excluded: zero error" for i, e in enumerate(errors) if not e > 0]
    return RateTable(list(map(float, h)), list(map(int, ndofs)), list(map(float, errors)), rates, notes, label)


def log_linear_fit(x, errors):
    """Least-squares slope and R^2 of ``log(error)`` against ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.log(np.asarray(errors, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


# -- activation and regions ---------------------------------------------------
def activation_time(trajectory, c_crit=0.95, space=None):
    """First stored time at which each element mean exceeds ``c_crit`` (``inf`` if never)."""
    space = trajectory.space if space is None else space
    t_hat = np.full(space.mesh.n_elements, np.inf)
    W = space.element_mean_weights()
    for t, C in zip(trajectory.times, trajectory.states):
        means = np.einsum("ei,ei->e", W, space.blocks(C))
        hit = (means > c_crit) & np.isinf(t_hat)
        t_hat[hit] = t
    return t_hat


class ActivationProbe:
    """Online activation-time tracker usable as an :func:`integrate` probe."""

    def __init__(self, space, c_crit=0.95):
        self.space = space
        self.c_crit = c_crit
        self.t_hat = np.full(space.mesh.n_elements, np.inf)
        self._W = space.element_mean_weights()

    def __call__(self, t, C):
        means = np.einsum("ei,ei->e", self._W, self.space.blocks(C))
        hit = (means > self.c_crit) & np.isinf(self.t_hat)
        self.t_hat[hit] = t
        return int(np.isfinite(self.t_hat).sum())


def region_mean_weights(space, region):
    region = np.unique(np.asarray(region, dtype=np.int64))
    if region.size == 0:
        raise ContractError("region is empty")
    if region.min() < 0 or region.max() >= space.mesh.n_elements:
        raise ContractError(f"region references element ids outside 0..{space.mesh.n_elements - 1}")
    areas = space.mesh.areas[region]
    W = space.element_mean_weights()[region] * (areas / areas.sum())[:, None]
    return region, W


def region_mean_probe(space, region):
    region, W = region_mean_weights(space, region)
    return lambda t, C: float(np.sum(W * space.blocks(C)[region]))


def region_mean(trajectory, region, space=None):
    """Area-weighted mean of ``c_h`` over ``region`` at every stored time."""
    space = trajectory.space if space is None else space
    fn = region_mean_probe(space, region)
    return np.array([fn(t, C) for t, C in zip(trajectory.times, trajectory.states)])


def elements_in_box(mesh, box):
    """Ids of elements whose centroid lies in ``(x0, x1, y0, y1)``."""
    x0, x1, y0, y1 = box
    c = mesh.centroids
    return np.flatnonzero((c[:, 0] >= x0) & (c[:, 0] <= x1) & (c[:, 1] >= y0) & (c[:, 1] <= y1))


# -- CSV ---------------------------------------------------------------------
def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "inf" if v == math.inf else ("nan" if math.isnan(v) else repr(v))


def write_rate_table(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "ndofs", "error", "rate"])
        for h, n, e, r in table.rows():
            w.writerow([_fmt(h), int(n), _fmt(e), "" if math.isnan(r) else _fmt(r)])


def write_activation(t_hat, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element_id", "t_hat"])
        for i, t in enumerate(t_hat):
            w.writerow([i, _fmt(t)])


def write_series(times, values, path, name="mean"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", name])
        for t, v in zip(times, values):
            w.writerow([_fmt(t), _fmt(v)])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
