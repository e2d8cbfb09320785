"""Crank-Nicolson time stepping with semi-implicit or Picard-implicit reaction.

Each step solves

    [M + dt/2 (A - M_a) + dt/2 N(C*)] C^{n+1}
        = [M - dt/2 (A - M_a) - dt/2 N(C*)] C^n + dt/2 (F^{n+1} + F^n)

where ``N(C*)`` is the block-diagonal nonlinear reaction matrix frozen at
``C*``. Linear systems are solved for the increment from the current
iterate, so the solver tolerance is relative to the current residual.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import kernels
from .assembly import assemble_load, assemble_operators, block_diagonal, nonlinear_blocks
from .errors import ConfigError, SolverError

log = logging.getLogger(__name__)

SCHEMES = ("semi_implicit", "implicit")
SOLVERS = ("direct", "iterative")


@dataclass
class StepperConfig:
    dt: float
    t_final: float
    scheme: str = "semi_implicit"
    picard_tol: float = 1e-10
    picard_max_iter: int = 20
    linear_solver: str = "direct"
    solver_tol: float = 1e-12
    store_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"must be positive, got {self.dt}", key="dt")
        if not self.t_final >= self.dt * (1 - 1e-12):
            raise ConfigError(f"must be >= dt ({self.dt}), got {self.t_final}", key="t_final")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}", key="scheme")
        if not self.picard_tol > 0:
            raise ConfigError(f"must be positive, got {self.picard_tol}", key="picard_tol")
        if self.picard_max_iter < 1:
            raise ConfigError(f"must be >= 1, got {self.picard_max_iter}", key="picard_max_iter")
        if self.linear_solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.linear_solver!r}; expected one of {SOLVERS}", key="linear_solver")
        if not self.solver_tol > 0:
            raise ConfigError(f"must be positive, got {self.solver_tol}", key="solver_tol")
        if self.store_every < 1:
            raise ConfigError(f"must be >= 1, got {self.store_every}", key="store_every")
        n = round(self.t_final / self.dt)
        if abs(n * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ConfigError(f"t_final={self.t_final} is not a whole number of steps of {self.dt}", key="dt")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))


class CrankNicolsonSystem:
    """Frozen linear parts of the step matrix plus the nonlinear-block solver."""

    REFACTOR_AFTER = 8

    def __init__(self, space, operators, config):
        self.space = space
        self.ops = operators
        self.config = config
        h = 0.5 * config.dt
        K = (operators.A - operators.M_alpha).tocsr()
        self.lhs_fixed = (operators.M + h * K).tocsr()
        self.rhs_fixed = (operators.M - h * K).tocsr()
        self._lu = None
        self.factorizations = 0
        self.cg_iterations = 0

    def nonlinear(self, C_star):
        return nonlinear_blocks(self.space, self.ops.alpha_weights, C_star)

    def rhs(self, C_n, Nb, F_n, F_np1):
        h = 0.5 * self.config.dt
        return self.rhs_fixed @ C_n - h * kernels.block_matvec(Nb, C_n) + h * (F_np1 + F_n)

    def residual(self, x, b, Nb):
        return b - (self.lhs_fixed @ x + 0.5 * self.config.dt * kernels.block_matvec(Nb, x))

    def _factor(self, Nb, step):
        S = (self.lhs_fixed + 0.5 * self.config.dt * block_diagonal(Nb)).tocsc()
        try:
            lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverError(f"sparse factorization failed: {exc}", step=step) from None
        self.factorizations += 1
        return lu

    def solve(self, b, Nb, x0, step=None):
        """Solve the step system for the increment from ``x0``; returns ``(x, residual_norm)``.

        ``direct`` factorizes the current matrix. ``iterative`` runs CG
        preconditioned with the most recent factorization and refactorizes
        once CG needs more than ``REFACTOR_AFTER`` iterations.
        """
        h = 0.5 * self.config.dt
        r0 = self.residual(x0, b, Nb)
        if not np.all(np.isfinite(r0)):
            raise SolverError("non-finite values in the step system", step=step)
        r0n = np.linalg.norm(r0)
        if r0n == 0.0:
            return x0.copy(), 0.0
        tol = self.config.solver_tol
        delta = None
        if self.config.linear_solver == "iterative":
            if self._lu is None:
                self._lu = self._factor(Nb, step)
            n = self.space.n_dofs
            op = spla.LinearOperator((n, n), matvec=lambda v: self.lhs_fixed @ v + h * kernels.block_matvec(Nb, v))
            pre = spla.LinearOperator((n, n), matvec=self._lu.solve)
            count = [0]

            def cb(_):
                count[0] += 1

            d, info = spla.cg(op, r0, rtol=tol, atol=0.0, maxiter=self.REFACTOR_AFTER, M=pre, callback=cb)
            self.cg_iterations += count[0]
            if info == 0 and np.all(np.isfinite(d)):
                delta = d
            else:
                self._lu = None
        if delta is None:
            lu = self._factor(Nb, step)
            if self.config.linear_solver == "iterative":
                self._lu = lu
            delta = lu.solve(r0)
        x = x0 + delta
        if not np.all(np.isfinite(x)):
            raise SolverError("solution became non-finite", step=step)
        res = np.linalg.norm(self.residual(x, b, Nb))
        if res > max(1e3 * tol * r0n, 1e-10 * np.linalg.norm(b)):
            raise SolverError(f"linear solve residual {res:.3e} exceeds tolerance", step=step)
        return x, res


@dataclass
class StepInfo:
    iterations: int = 1
    update_norm: float = 0.0
    converged: bool = True
    residual: float = 0.0


def step_semi_implicit(C_n, C_nm1, system, F_n, F_np1, config=None, step=None):
    """One step with ``C* = 3/2 C^n - 1/2 C^{n-1}``; exactly one linear solve."""
    C_star = 1.5 * C_n - 0.5 * C_nm1
    Nb = system.nonlinear(C_star)
    b = system.rhs(C_n, Nb, F_n, F_np1)
    x, res = system.solve(b, Nb, C_n, step=step)
    return x, StepInfo(1, float(np.linalg.norm(x - C_n)), True, res)


def step_implicit(C_n, system, F_n, F_np1, config=None, step=None):
    """One step with Picard iteration on ``C* = (C^{n+1} + C^n) / 2``.

    Stops when the Euclidean update norm drops to ``picard_tol``; after
    ``picard_max_iter`` iterations the last iterate is returned with
    ``converged=False``.
    """
    config = system.config if config is None else config
    Ck = C_n
    upd = math.inf
    res = 0.0
    for k in range(1, config.picard_max_iter + 1):
        Nb = system.nonlinear(0.5 * (Ck + C_n))
        b = system.rhs(C_n, Nb, F_n, F_np1)
        Cn1, res = system.solve(b, Nb, Ck, step=step)
        upd = float(np.linalg.norm(Cn1 - Ck))
        Ck = Cn1
        if upd <= config.picard_tol:
            return Ck, StepInfo(k, upd, True, res)
    return Ck, StepInfo(config.picard_max_iter, upd, False, res)


@dataclass
class Trajectory:
    """Stored times/states plus per-step records of a run."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    records: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    probes: dict = field(default_factory=dict)
    dg_integral: float = 0.0
    dg_integral_history: list = field(default_factory=list)
    final_state: np.ndarray | None = None
    final_time: float = 0.0
    error_integrand: list = field(default_factory=list)
    space: object = None

    @property
    def picard_unconverged(self):
        return [r["step"] for r in self.records if not r["converged"]]

    @property
    def max_picard_iterations(self):
        return max((r["iterations"] for r in self.records), default=0)


def integrate(C0, params, space, config, spec, probes=None, error_integrand=None, t0=0.0):
    """March ``config.n_steps`` steps from ``C0``.

    Parameters
    ----------
    probes : dict, optional
        ``name -> fn(t, C)`` evaluated at every time level (including t0).
    error_integrand : callable, optional
        ``fn(t, C)`` giving the squared DG norm of the error at ``t``; its
        trapezoidal time integral is accumulated in ``dg_integral``.
    """
    probes = dict(probes or {})
    traj = Trajectory(space=space, probes={k: [] for k in probes})
    dt = config.dt
    ops = assemble_operators(space, params, spec, t0)
    system = CrankNicolsonSystem(space, ops, config)
    rebuild = params.operators_time_dependent

    C = np.array(C0, dtype=float)
    if C.shape != (space.n_dofs,):
        raise ConfigError(f"initial vector has shape {C.shape}, expected ({space.n_dofs},)", key="initial")
    C_prev = C.copy()
    F_n = assemble_load(space, params, t0, spec=spec)

    def observe(step, t, C):
        traj.step_times.append(t)
        for name, fn in probes.items():
            traj.probes[name].append(fn(t, C))
        if error_integrand is not None:
            traj.error_integrand.append(float(error_integrand(t, C)))
            if len(traj.error_integrand) > 1:
                traj.dg_integral += 0.5 * dt * (traj.error_integrand[-1] + traj.error_integrand[-2])
            traj.dg_integral_history.append(traj.dg_integral)
        if step % config.store_every == 0 or step == config.n_steps:
            traj.times.append(t)
            traj.states.append(C.copy())

    observe(0, t0, C)
    for n in range(config.n_steps):
        t_np1 = t0 + (n + 1) * dt
        if rebuild:
            ops = assemble_operators(space, params, spec, t0 + (n + 0.5) * dt)
            system = CrankNicolsonSystem(space, ops, config)
        F_np1 = assemble_load(space, params, t_np1, spec=spec)
        try:
            if config.scheme == "semi_implicit":
                C_new, info = step_semi_implicit(C, C_prev, system, F_n, F_np1, step=n)
            else:
                C_new, info = step_implicit(C, system, F_n, F_np1, step=n)
        except SolverError as exc:
            exc.trajectory = traj
            traj.final_state, traj.final_time = C, t_np1 - dt
            raise
        rec = {
            "step": n + 1,
            "t": t_np1,
            "iterations": info.iterations,
            "update_norm": info.update_norm,
            "residual": info.residual,
            "converged": info.converged,
        }
        traj.records.append(rec)
        if not info.converged:
            msg = f"step {n + 1}: Picard stopped after {info.iterations} iterations (update {info.update_norm:.3e})"
            if len(traj.warnings) < 10:
                log.warning(msg)
            elif len(traj.warnings) == 10:
                log.warning("further Picard warnings suppressed; see the run report")
            traj.warnings.append(msg)
        C_prev, C = C, C_new
        F_n = F_np1
        observe(n + 1, t_np1, C)
        for name in probes:
            rec[name] = traj.probes[name][-1]
    traj.final_state = C
    traj.final_time = t0 + config.n_steps * dt
    return traj
