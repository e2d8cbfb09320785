"""Traveling-wave reference profile and the 2D wave benchmark.

The profile ``psi(xi)``, ``xi = x - v t``, solves

    psi' = chi,    chi' = -(v / d) chi + (alpha / d) psi (psi - 1)

and is integrated with the adaptive Dormand-Prince pair from
:func:`scipy.integrate.solve_ivp`, then sampled on a dense grid and
interpolated with cubic Hermite splines using the exact derivatives.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .analysis import l2_error
from .assembly import PenaltySpec, project_l2
from .dgspace import DgSpace
from .errors import InputError, SolverError
from .mesh import DIRICHLET, NEUMANN, generate_voronoi_mesh
from .physics import Field, ModelParams
from .timestepper import StepperConfig, integrate

DOMAIN = (0.0, 5.0, 0.0, 1.0)
BOUNDARY = {"left": DIRICHLET, "right": DIRICHLET, "bottom": NEUMANN, "top": NEUMANN}
BLOWUP = 10.0


class WaveDivergenceError(SolverError):
    """The profile left ``|psi| <= 10`` before ``xi_max``."""

    def __init__(self, xi):
        self.xi = float(xi)
        super().__init__(f"wave profile blew up (|psi| > {BLOWUP}) at xi = {self.xi:.6g}")


@dataclass
class WaveProfile:
    """Sampled profile with cubic Hermite interpolation; flat outside ``[xi[0], xi[-1]]``."""

    speed: float
    xi: np.ndarray
    psi: np.ndarray
    chi: np.ndarray
    d_ext: float = 1e-3
    alpha: float = 1.0
    _spline: object = field(default=None, repr=False)

    def __post_init__(self):
        dchi = -(self.speed / self.d_ext) * self.chi + (self.alpha / self.d_ext) * self.psi * (self.psi - 1.0)
        self._spline = CubicHermiteSpline(self.xi, self.psi, self.chi)
        self._dspline = CubicHermiteSpline(self.xi, self.chi, dchi)

    def __call__(self, xi):
        """``psi(xi)`` with endpoint clamping."""
        xi = np.asarray(xi, dtype=float)
        inner = self._spline(np.clip(xi, self.xi[0], self.xi[-1]))
        return np.where(xi < self.xi[0], self.psi[0], np.where(xi > self.xi[-1], self.psi[-1], inner))

    def derivative(self, xi):
        xi = np.asarray(xi, dtype=float)
        inside = (xi >= self.xi[0]) & (xi <= self.xi[-1])
        return np.where(inside, self._dspline(np.clip(xi, self.xi[0], self.xi[-1])), 0.0)


def wave_rhs(d_ext, alpha, v):
    def f(xi, u):
        psi, chi = u
        return np.array([chi, -(v / d_ext) * chi + (alpha / d_ext) * psi * (psi - 1.0)])

    return f


def integrate_wave_ode(d_ext=1e-3, alpha=1.0, v=0.1, psi0=1.0, chi0=-1e-2, xi_max=50.0, tol=1e-10, spacing=1e-3):
    """Adaptive RK45 integration of the wave ODE sampled every ``spacing``.

    Raises
    ------
    WaveDivergenceError
        if ``|psi|`` exceeds 10 before ``xi_max``.
    """
    if not d_ext > 0:
        raise InputError(f"d_ext must be positive, got {d_ext}")
    if not tol > 0:
        raise InputError(f"tol must be positive, got {tol}")
    rhs = wave_rhs(d_ext, alpha, v)

    def blowup(xi, u):
        return BLOWUP - abs(u[0])

    blowup.terminal = True
    n = int(math.ceil(xi_max / spacing))
    grid = np.linspace(0.0, xi_max, n + 1)
    sol = solve_ivp(
        rhs, (0.0, xi_max), [psi0, chi0], method="RK45", rtol=tol, atol=tol, t_eval=grid, events=blowup, max_step=10 * spacing
    )
    if sol.status == 1:
        raise WaveDivergenceError(sol.t_events[0][0])
    if sol.status != 0:
        raise SolverError(f"wave ODE integration failed: {sol.message}")
    return WaveProfile(v, sol.t, sol.y[0], sol.y[1], d_ext, alpha)


def wave_exact(profile, x, t):
    """``psi(x - v t)``; independent of ``y``."""
    x = np.asarray(x, dtype=float)
    xs = x[..., 0] if x.ndim and x.shape[-1] == 2 else x
    return profile(xs - profile.speed * t)


def wave_field(profile):
    return Field.function(lambda x, y, t: profile(np.asarray(x) - profile.speed * t), label="wave")


class FrontTracker:
    """x-position of the ``level`` crossing of ``c_h``.

    ``pointwise`` samples ``c_h`` along horizontal lines and averages the
    first downward crossing found on each; ``element_mean`` interpolates
    element means against centroid x in the band ``|y - y_mid| <= 0.25``.
    Basis values at the sample points are computed once.
    """

    def __init__(self, space, level=0.5, lines=(0.25, 0.5, 0.75), samples=2001, method="pointwise"):
        if method not in ("pointwise", "element_mean"):
            raise InputError(f"unknown front method {method!r}")
        self.space = space
        self.level = level
        self.method = method
        mesh = space.mesh
        V = mesh.vertices
        if method == "element_mean":
            c = mesh.centroids
            ymid = 0.5 * (V[:, 1].min() + V[:, 1].max())
            band = np.flatnonzero(np.abs(c[:, 1] - ymid) <= 0.25)
            self._order = band[np.argsort(c[band, 0])]
            self._x = c[self._order, 0]
            return
        self._x = np.linspace(V[:, 0].min(), V[:, 0].max(), samples)
        self._lines = []
        for y in lines:
            pts = np.column_stack([self._x, np.full_like(self._x, y)])
            el = mesh.locate(pts)
            if (el < 0).any():
                raise InputError(f"front sampling line y={y} leaves the mesh")
            phi, _ = space._eval(el, pts[:, None, :])
            self._lines.append((el, phi[:, 0, :]))

    def __call__(self, C):
        if self.method == "element_mean":
            return _first_crossing(self._x, self.space.element_means(C)[self._order], self.level)
        Cb = self.space.blocks(C)
        out = []
        for el, phi in self._lines:
            v = _first_crossing(self._x, np.einsum("ei,ei->e", phi, Cb[el]), self.level)
            if np.isfinite(v):
                out.append(v)
        return float(np.mean(out)) if out else math.nan


def front_position(space, C, level=0.5, method="pointwise"):
    """One-off front position; see :class:`FrontTracker`."""
    return FrontTracker(space, level, method=method)(C)


def _first_crossing(x, v, level):
    above = v >= level
    idx = np.flatnonzero(above[:-1] & ~above[1:])
    if idx.size == 0:
        return math.nan
    i = idx[0]
    return float(x[i] + (level - v[i]) * (x[i + 1] - x[i]) / (v[i + 1] - v[i]))


@dataclass
class WaveResult:
    l2_error: float
    times: np.ndarray
    front: np.ndarray
    speed: float
    picard_max: int
    picard_unconverged: list
    n_el: int
    p: int
    dt: float
    T: float
    scheme: str
    diverged: bool = False
    message: str = ""
    trajectory: object = None


def fit_speed(times, front, t0=2.0, t1=5.0):
    """Least-squares slope of front position over ``[t0, t1]``."""
    times = np.asarray(times)
    front = np.asarray(front)
    sel = (times >= t0 - 1e-12) & (times <= t1 + 1e-12) & np.isfinite(front)
    if sel.sum() < 2:
        return math.nan
    return float(np.polyfit(times[sel], front[sel], 1)[0])


def run_wave_benchmark(
    n_el=300,
    p=3,
    dt=0.01,
    T=5.0,
    scheme="semi_implicit",
    seed=0,
    lloyd_iterations=50,
    eta0=10.0,
    mesh=None,
    profile=None,
    front_every=10,
    linear_solver="direct",
    front_method="pointwise",
):
    """Run the 2D traveling-wave benchmark on ``(0,5) x (0,1)``.

    Dirichlet data from the exact wave on ``x = 0`` and ``x = 5``;
    homogeneous Neumann on ``y = 0`` and ``y = 1``. A run whose linear
    solves break down is reported with ``diverged=True`` and infinite error.
    """
    if mesh is None:
        mesh = generate_voronoi_mesh(DOMAIN, n_el, lloyd_iterations, seed, BOUNDARY)
    profile = integrate_wave_ode() if profile is None else profile
    space = DgSpace(mesh, p)
    exact = wave_field(profile)
    params = ModelParams(d_ext=profile.d_ext, alpha=profile.alpha, dirichlet=exact, initial=exact)
    spec = PenaltySpec(eta0)
    cfg = StepperConfig(dt=dt, t_final=T, scheme=scheme, linear_solver=linear_solver, store_every=10**9)
    C0 = project_l2(space, exact)
    front_t, front_x = [], []
    step = [0]
    tracker = FrontTracker(space, method=front_method)

    def probe(t, C):
        if step[0] % front_every == 0:
            front_t.append(t)
            front_x.append(tracker(C))
        step[0] += 1
        return None

    def err(x, y, t):
        return profile(x - profile.speed * t)

    try:
        traj = integrate(C0, params, space, cfg, spec, probes={"front": probe})
    except SolverError as exc:
        traj = getattr(exc, "trajectory", None)
        return WaveResult(
            math.inf, np.array(front_t), np.array(front_x), math.nan,
            traj.max_picard_iterations if traj else 0, traj.picard_unconverged if traj else [],
            mesh.n_elements, p, dt, T, scheme, True, str(exc), traj,
        )
    e = l2_error(space, traj.final_state, err, traj.final_time)
    times = np.array(front_t)
    front = np.array(front_x)
    return WaveResult(
        e, times, front, fit_speed(times, front), traj.max_picard_iterations, traj.picard_unconverged,
        mesh.n_elements, p, dt, T, scheme, not math.isfinite(e), "", traj,
    )


def write_front(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "front_x"])
        for t, x in zip(result.times, result.front):
            w.writerow([repr(float(t)), repr(float(x))])


def write_summary(results, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "p", "n_el", "dt", "scheme", "l2_error"])
        for r in results:
            w.writerow([repr(float(r.T)), r.p, r.n_el, repr(float(r.dt)), r.scheme, repr(float(r.l2_error))])
