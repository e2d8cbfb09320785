"""Command-line driver: ``polyfk run``, ``polyfk mesh ...``, ``polyfk oracle ...``.

Exit codes: 0 success, 2 bad input, 3 mesh topology, 4 solver failure,
1 anything else raised by the package.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .analysis import (
    ActivationProbe,
    dg_norm,
    l2_norm,
    region_mean_probe,
    write_activation,
    write_rate_table,
    write_series,
)
from .assembly import (
    assemble_load,
    assemble_mass,
    assemble_nonlinear_reaction,
    assemble_linear_reaction,
    assemble_stiffness,
    dump_coo,
    project_l2,
)
from .config import (
    build_mesh,
    model_params,
    parse_regions,
    penalty_spec,
    read_config,
    stepper_config,
)
from .dgspace import DgSpace
from .errors import ConfigError, PolyFKError, SolverError
from .io import write_snapshot
from .manufactured import run_convergence, testcase1
from .timestepper import integrate
from .mesh import (
    agglomerate,
    check_regularity,
    generate_cartesian_mesh,
    generate_voronoi_mesh,
    load_mesh,
    save_mesh,
)
from .wavebench import integrate_wave_ode, run_wave_benchmark, write_front, write_summary

log = logging.getLogger("polyfk")


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_report(cfg, out, results, trajectory=None, error=None):
    report = {
        "polyfk_version": __version__,
        "kernel_backend": kernels.backend(),
        "config_path": str(cfg.path),
        "config": cfg.text,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "results": results,
    }
    if trajectory is not None:
        report["steps"] = trajectory.records
        report["warnings"] = trajectory.warnings
        report["picard_unconverged_steps"] = trajectory.picard_unconverged
    if error is not None:
        report["error"] = {"type": type(error).__name__, "message": str(error), "exit_code": error.exit_code}
    path = out / "report.json"
    path.write_text(json.dumps(_jsonable(report), indent=1, sort_keys=True) + "\n")
    return path


# -- modes ---------------------------------------------------------------------
def _run_convergence(cfg):
    conv = cfg.sections["convergence"]
    time_sec = cfg.sections["time"]
    case_name = conv.str("case", "testcase1", choices=("testcase1",))
    case = testcase1(conv.float("d_ext", 1.0, positive=True), conv.float("alpha", 1.0, nonneg=True))
    counts = conv.ints("n_elements", [30, 100, 300, 1000], minimum=1)
    degrees = conv.ints("degrees", [1, 2, 3, 4], minimum=1)
    st = stepper_config(time_sec, {"dt": 1e-5, "t_final": 1e-3})
    spec = penalty_spec(cfg.sections["space"])
    msec = cfg.sections["mesh"]
    meshes = [build_mesh(msec, cfg.seed, cfg.path.parent, n) for n in counts]
    h_tables, p_tables, runs = run_convergence(
        case, meshes, degrees, st.dt, st.t_final, st.scheme, spec.eta0, st.linear_solver
    )
    for p, tab in h_tables.items():
        write_rate_table(tab, cfg.output / f"rates_p{p}.csv")
    for i, tab in p_tables.items():
        write_rate_table(tab, cfg.output / f"p_refinement_mesh{counts[i]}.csv")
    return {
        "case": case_name,
        "scheme": st.scheme,
        "h_rates": {p: t.rates for p, t in h_tables.items()},
        "errors": {f"{counts[i]}:{p}": r.energy for (i, p), r in runs.items()},
        "picard_max_iterations": max(r.trajectory.max_picard_iterations for r in runs.values()),
    }, None


def _run_wave(cfg):
    w = cfg.sections["wave"]
    time_sec = cfg.sections["time"]
    st = stepper_config(time_sec, {"dt": 0.01, "t_final": 5.0, "linear_solver": "iterative"})
    spec = penalty_spec(cfg.sections["space"])
    p = cfg.sections["space"].int("degree", 3, minimum=1)
    profile = integrate_wave_ode(
        d_ext=w.float("d_ext", 1e-3, positive=True),
        alpha=w.float("alpha", 1.0, nonneg=True),
        v=w.float("speed", 0.1),
        psi0=w.float("psi0", 1.0),
        chi0=w.float("chi0", -1e-2),
        xi_max=w.float("xi_max", 50.0, positive=True),
        tol=w.float("ode_tol", 1e-10, positive=True),
    )
    msec = cfg.sections["mesh"]
    mesh = None
    if msec.has("file"):
        mesh = build_mesh(msec, cfg.seed, cfg.path.parent)
    res = run_wave_benchmark(
        n_el=msec.int("n_elements", 300, minimum=1),
        p=p,
        dt=st.dt,
        T=st.t_final,
        scheme=st.scheme,
        seed=cfg.seed,
        lloyd_iterations=msec.int("lloyd_iterations", 50, minimum=0),
        eta0=spec.eta0,
        mesh=mesh,
        profile=profile,
        front_every=w.int("front_every", 10, minimum=1),
        linear_solver=st.linear_solver,
        front_method=w.str("front_method", "pointwise", choices=("pointwise", "element_mean")),
    )
    write_front(res, cfg.output / "front.csv")
    write_summary([res], cfg.output / "summary.csv")
    if cfg.snapshot_every and res.trajectory is not None and res.trajectory.final_state is not None:
        write_snapshot(res.trajectory.space, res.trajectory.final_state, res.trajectory.final_time, cfg.output / "final.vtk")
    out = {
        "l2_error": res.l2_error,
        "speed": res.speed,
        "diverged": res.diverged,
        "message": res.message,
        "picard_max_iterations": res.picard_max,
        "n_el": res.n_el,
    }
    return out, res.trajectory


def _run_simulate(cfg):
    msec = cfg.sections["mesh"]
    mesh = build_mesh(msec, cfg.seed, cfg.path.parent)
    space = DgSpace(mesh, cfg.sections["space"].int("degree", 1, minimum=1))
    params = model_params(cfg.sections["model"], cfg.path.parent, mesh.n_elements)
    spec = penalty_spec(cfg.sections["space"])
    st = stepper_config(cfg.sections["time"])
    probes_sec = cfg.sections["probes"]
    regions = parse_regions(probes_sec, mesh)
    tab = space.volume_table()
    params.check_at(tab.points[..., 0], tab.points[..., 1], 0.0, np.broadcast_to(np.arange(mesh.n_elements)[:, None], tab.weights.shape))

    probes = {name: region_mean_probe(space, ids) for name, ids in regions.items()}
    act = None
    if probes_sec.has("activation_threshold"):
        act = ActivationProbe(space, probes_sec.float("activation_threshold"))
        probes["activated_elements"] = act
    if probes_sec.str("norms", "yes", choices=("yes", "no")) == "yes":
        probes["l2_norm"] = lambda t, C: l2_norm(space, C)
        probes["dg_norm"] = lambda t, C: dg_norm(space, params, spec, C, t)
    if cfg.snapshot_every:
        counter = [0]

        def snap(t, C):
            k = counter[0]
            counter[0] += 1
            if k % cfg.snapshot_every == 0 or k == st.n_steps:
                write_snapshot(space, C, t, cfg.output / f"snapshot_{k:06d}.vtk")
            return None

        probes["_snapshot"] = snap

    C0 = project_l2(space, params.initial)
    error = None
    try:
        traj = integrate(C0, params, space, st, spec, probes=probes)
    except SolverError as exc:
        traj = exc.trajectory
        error = exc
    for name in regions:
        write_series(traj.step_times, traj.probes[name], cfg.output / f"region_{name}.csv")
    if act is not None:
        write_activation(act.t_hat, cfg.output / "activation.csv")
    for rec in traj.records:
        rec.pop("_snapshot", None)
    out = {
        "n_elements": mesh.n_elements,
        "n_dofs": space.n_dofs,
        "final_time": traj.final_time,
        "picard_max_iterations": traj.max_picard_iterations,
        "activated_elements": None if act is None else int(np.isfinite(act.t_hat).sum()),
    }
    if error is not None:
        error.trajectory = traj
        error.partial_results = out
        raise error
    return out, traj


MODES = {"convergence": _run_convergence, "wave": _run_wave, "simulate": _run_simulate}


def cmd_run(args):
    cfg = read_config(args.config)
    cfg.output.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        results, traj = MODES[cfg.mode](cfg)
    except SolverError as exc:
        write_report(cfg, cfg.output, getattr(exc, "partial_results", {}), getattr(exc, "trajectory", None), exc)
        raise
    results["wall_seconds"] = time.perf_counter() - t0
    path = write_report(cfg, cfg.output, results, traj)
    print(f"wrote {path}")
    return 0


# -- mesh tools ------------------------------------------------------------------
def cmd_mesh_gen(args):
    domain = tuple(args.domain)
    bnd = args.boundary
    if args.kind == "cartesian":
        mesh = generate_cartesian_mesh(domain, args.nx, args.ny, bnd)
    else:
        mesh = generate_voronoi_mesh(domain, args.n, args.lloyd, args.seed, bnd)
    save_mesh(mesh, args.output)
    print(f"{args.output}: {mesh.n_elements} elements, h = {mesh.mesh_size:.6g}")
    return 0


def cmd_mesh_agglomerate(args):
    fine = load_mesh(args.mesh)
    coarse = agglomerate(fine, args.n, args.seed)
    save_mesh(coarse, args.output)
    print(f"{args.output}: {coarse.n_elements} elements agglomerated from {fine.n_elements}")
    return 0


def cmd_mesh_check(args):
    mesh = load_mesh(args.mesh)
    reg = check_regularity(mesh)
    kinds = np.bincount(mesh.face_kind, minlength=3)
    print(f"elements {mesh.n_elements}")
    print(f"faces {mesh.n_faces} (interior {kinds[0]}, dirichlet {kinds[1]}, neumann {kinds[2]})")
    print(f"area {mesh.domain_area:.12g}")
    print(f"mesh_size {mesh.mesh_size:.6g}")
    print(f"shape_ratio {reg.shape_min:.4g} .. {reg.shape_max:.4g}")
    print(f"contact_ratio {reg.contact_min:.4g} .. {reg.contact_max:.4g}")
    print("ok")
    return 0


def cmd_oracle_dump(args):
    """Write M, A, M_alpha, M_tilde(C0) and F(0) for the ``simulate``-style config."""
    cfg = read_config(args.config)
    out = Path(args.output) if args.output else cfg.output / "matrices"
    out.mkdir(parents=True, exist_ok=True)
    mesh = build_mesh(cfg.sections["mesh"], cfg.seed, cfg.path.parent)
    space = DgSpace(mesh, cfg.sections["space"].int("degree", 1, minimum=1))
    params = model_params(cfg.sections["model"], cfg.path.parent, mesh.n_elements)
    spec = penalty_spec(cfg.sections["space"])
    C0 = project_l2(space, params.initial)
    A, _ = assemble_stiffness(space, params, spec)
    mats = {
        "M": assemble_mass(space),
        "A": A,
        "M_alpha": assemble_linear_reaction(space, params),
        "M_tilde": assemble_nonlinear_reaction(space, params, C0),
    }
    for name, mat in mats.items():
        dump_coo(mat, out / f"{name}.txt")
    F = assemble_load(space, params, 0.0, spec=spec)
    with open(out / "F.txt", "w") as fh:
        for i, v in enumerate(F):
            fh.write(f"{i} {float(v)!r}\n")
    with open(out / "C0.txt", "w") as fh:
        for i, v in enumerate(C0):
            fh.write(f"{i} {float(v)!r}\n")
    print(f"wrote {len(mats)} matrices ({space.n_dofs} dofs) to {out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="polyfk", description="PolyDG Fisher-Kolmogorov solver")
    ap.add_argument("--version", action="version", version=f"polyfk {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a run configuration")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    m = sub.add_parser("mesh", help="mesh tools").add_subparsers(dest="mesh_command", required=True)
    g = m.add_parser("gen", help="generate a mesh")
    g.add_argument("--kind", choices=("voronoi", "cartesian"), default="voronoi")
    g.add_argument("--n", type=int, default=100, help="number of Voronoi cells")
    g.add_argument("--nx", type=int, default=4)
    g.add_argument("--ny", type=int, default=4)
    g.add_argument("--domain", type=float, nargs=4, default=(0.0, 1.0, 0.0, 1.0), metavar=("X0", "X1", "Y0", "Y1"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--lloyd", type=int, default=50)
    g.add_argument("--boundary", choices=("dirichlet", "neumann"), default="dirichlet")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_mesh_gen)
    a = m.add_parser("agglomerate", help="merge fine elements into coarse polygons")
    a.add_argument("mesh")
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("-o", "--output", required=True)
    a.set_defaults(func=cmd_mesh_agglomerate)
    c = m.add_parser("check", help="validate a mesh file")
    c.add_argument("mesh")
    c.set_defaults(func=cmd_mesh_check)

    o = sub.add_parser("oracle", help="cross-checking dumps").add_subparsers(dest="oracle_command", required=True)
    d = o.add_parser("dump-matrices", help="write operators as 'i j value' (0-based)")
    d.add_argument("config")
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_oracle_dump)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PolyFKError as exc:
        print(f"polyfk: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"polyfk: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
