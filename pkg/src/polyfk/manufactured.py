"""Closed-form manufactured solutions and convergence sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import dg_error, energy_error, l2_error, make_rate_table
from .assembly import PenaltySpec, project_l2
from .dgspace import DgSpace
from .physics import Field, ModelParams
from .timestepper import StepperConfig, integrate


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution with its gradient and the forcing it induces.

    ``exact``, ``forcing`` and ``dc_dt`` take ``(x, y, t)``; ``grad`` returns
    shape ``x.shape + (2,)``. The diffusion is isotropic ``d_ext I``.
    """

    exact: object
    grad: object
    dc_dt: object
    laplacian: object
    forcing: object
    d_ext: float
    alpha: float
    name: str = ""

    def params(self):
        return ModelParams(
            d_ext=self.d_ext,
            alpha=self.alpha,
            forcing=Field.function(self.forcing, label=f"{self.name} forcing"),
            dirichlet=Field.function(self.exact, label=f"{self.name} trace"),
            initial=Field.function(self.exact, time_dependent=False, label=f"{self.name} initial"),
        )

    def residual(self, x, y, t):
        """``dc/dt - div(D grad c) - alpha c (1 - c) - f``; zero for a consistent case."""
        c = self.exact(x, y, t)
        return self.dc_dt(x, y, t) - self.d_ext * self.laplacian(x, y, t) - self.alpha * c * (1 - c) - self.forcing(x, y, t)


def testcase1(d_ext=1.0, alpha=1.0):
    """``c = (cos(pi x) cos(pi y) + 2) exp(-t)`` on the unit square, Dirichlet everywhere."""
    pi = math.pi

    def exact(x, y, t):
        return (np.cos(pi * x) * np.cos(pi * y) + 2.0) * np.exp(-t)

    def grad(x, y, t):
        e = np.exp(-t)
        return np.stack([-pi * np.sin(pi * x) * np.cos(pi * y) * e, -pi * np.cos(pi * x) * np.sin(pi * y) * e], axis=-1)

    def dc_dt(x, y, t):
        return -exact(x, y, t)

    def lap(x, y, t):
        return -2.0 * pi**2 * np.cos(pi * x) * np.cos(pi * y) * np.exp(-t)

    def forcing(x, y, t):
        c = exact(x, y, t)
        return -c + 2.0 * d_ext * pi**2 * np.cos(pi * x) * np.cos(pi * y) * np.exp(-t) - alpha * c * (1.0 - c)

    return ManufacturedCase(exact, grad, dc_dt, lap, forcing, float(d_ext), float(alpha), "testcase1")


@dataclass
class CaseRun:
    mesh_size: float
    degree: int
    ndofs: int
    energy: float
    l2: float
    trajectory: object


def solve_case(case, mesh, p, dt, T, scheme="semi_implicit", eta0=10.0, linear_solver="iterative"):
    """Integrate ``case`` on ``mesh`` with degree ``p`` and return its errors at ``T``."""
    space = DgSpace(mesh, p)
    params = case.params()
    spec = PenaltySpec(eta0)
    cfg = StepperConfig(dt=dt, t_final=T, scheme=scheme, linear_solver=linear_solver, store_every=10**9)
    C0 = project_l2(space, params.initial)

    def integrand(t, C):
        return dg_error(space, params, spec, C, case.exact, case.grad, t) ** 2

    traj = integrate(C0, params, space, cfg, spec, error_integrand=integrand)
    return CaseRun(
        mesh.mesh_size,
        p,
        space.n_dofs,
        energy_error(traj, case.exact),
        l2_error(space, traj.final_state, case.exact, traj.final_time),
        traj,
    )


def run_convergence(case, meshes, p_list, dt, T, scheme="semi_implicit", eta0=10.0, linear_solver="iterative"):
    """Energy-norm errors for every (mesh, p).

    Returns ``(h_tables, p_tables, runs)``: one h-refinement :class:`RateTable`
    per degree, one p-refinement table per mesh (indexed by position), and
    the raw :class:`CaseRun` grid ``runs[(i_mesh, p)]``.
    """
    runs = {}
    for i, mesh in enumerate(meshes):
        for p in p_list:
            runs[(i, p)] = solve_case(case, mesh, p, dt, T, scheme, eta0, linear_solver)
    h_tables = {}
    for p in p_list:
        rs = [runs[(i, p)] for i in range(len(meshes))]
        h_tables[p] = make_rate_table([r.mesh_size for r in rs], [r.ndofs for r in rs], [r.energy for r in rs], f"p={p}")
    p_tables = {}
    for i in range(len(meshes)):
        rs = [runs[(i, p)] for p in p_list]
        p_tables[i] = make_rate_table([float(p) for p in p_list], [r.ndofs for r in rs], [r.energy for r in rs], f"mesh {i}")
    return h_tables, p_tables, runs
