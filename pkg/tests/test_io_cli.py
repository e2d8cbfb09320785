import json

import numpy as np
import pytest

from polyfk.assembly import load_coo, project_l2
from polyfk.cli import main
from polyfk.dgspace import DgSpace
from polyfk.io import read_snapshot, write_snapshot
from polyfk.mesh import generate_cartesian_mesh, generate_voronoi_mesh, load_mesh
from polyfk.physics import Field

UNIT = (0.0, 1.0, 0.0, 1.0)

SIMULATE = """\
[run]
mode = simulate
output = out
seed = 5
snapshot_every = 1

[mesh]
source = voronoi
n_elements = 20
lloyd_iterations = 10
boundary = neumann

[space]
degree = 1

[time]
dt = {dt}
t_final = 0.2
scheme = implicit

[model]
alpha = 1
initial = {initial}

[probes]
activation_threshold = 0.5
region.all = box 0 1 0 1
"""


def _write(tmp_path, dt="0.1", initial="exp(-10 * (x**2 + y**2))", name="run.ini"):
    p = tmp_path / name
    p.write_text(SIMULATE.format(dt=dt, initial=initial))
    return p


def test_snapshot_round_trip(tmp_path):
    S = DgSpace(generate_voronoi_mesh(UNIT, 12, 10, 3), 2)
    C = project_l2(S, Field.constant(2.0))
    write_snapshot(S, C, 0.25, tmp_path / "c.vtk")
    snap = read_snapshot(tmp_path / "c.vtk")
    assert snap["t"] == 0.25
    np.testing.assert_allclose(snap["c"], 2.0, atol=1e-12)
    assert set(snap["element_id"].astype(int)) == set(range(12))
    assert snap["triangles"].max() < len(snap["points"])


def test_snapshot_keeps_discontinuities(tmp_path):
    S = DgSpace(generate_cartesian_mesh((0, 2, 0, 1), 2, 1), 1)
    C = project_l2(S, Field.per_element([0.0, 1.0]))
    write_snapshot(S, C, 0.0, tmp_path / "c.vtk")
    snap = read_snapshot(tmp_path / "c.vtk")
    on_interface = np.isclose(snap["points"][:, 0], 1.0)
    assert on_interface.sum() == 4
    np.testing.assert_allclose(sorted(snap["c"][on_interface]), [0, 0, 1, 1], atol=1e-12)


def test_run_simulate_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path)
    assert main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    rep = json.loads((out / "report.json").read_text())
    assert rep["mode"] == "simulate" and rep["seed"] == 5
    assert rep["results"]["n_elements"] == 20 and rep["results"]["final_time"] == pytest.approx(0.2)
    assert len(rep["steps"]) == 2 and rep["picard_unconverged_steps"] == []
    assert (out / "activation.csv").exists() and (out / "region_all.csv").exists()
    assert len(list(out.glob("snapshot_*.vtk"))) == 3
    assert "report.json" in capsys.readouterr().out


def test_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert main(["run", str(_write(d))]) == 0
    ra = json.loads((a / "out" / "report.json").read_text())["results"]
    rb = json.loads((b / "out" / "report.json").read_text())["results"]
    ra.pop("wall_seconds")
    rb.pop("wall_seconds")
    assert ra == rb
    assert (a / "out" / "activation.csv").read_text() == (b / "out" / "activation.csv").read_text()


def test_exit_code_input(tmp_path, capsys):
    assert main(["run", str(_write(tmp_path, dt="-0.1"))]) == 2
    assert "dt" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == 2
    bad = tmp_path / "parse.mesh"
    bad.write_text("polymesh 2d\nvertices 4\n0 0\n1 0\n1 1\nzz 1\n")
    assert main(["mesh", "check", str(bad)]) == 2
    assert "parse.mesh:6" in capsys.readouterr().err


def test_exit_code_topology(tmp_path, capsys):
    bow = tmp_path / "bow.mesh"
    bow.write_text("polymesh 2d\nvertices 4\n0 0\n1 1\n1 0\n0 1\nelements 1\n4 0 1 2 3\nboundary 0\n")
    assert main(["mesh", "check", str(bow)]) == 3
    assert "element 0" in capsys.readouterr().err


def test_exit_code_solver(tmp_path, capsys):
    cfg = _write(tmp_path, initial="log(x - 2)")
    with np.errstate(invalid="ignore"):
        assert main(["run", str(cfg)]) == 4
    assert "step 0" in capsys.readouterr().err
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["error"]["exit_code"] == 4


def test_mesh_tools(tmp_path, capsys):
    fine = tmp_path / "fine.mesh"
    assert main(["mesh", "gen", "--n", "60", "--seed", "2", "--lloyd", "5", "-o", str(fine)]) == 0
    assert load_mesh(fine).n_elements == 60
    coarse = tmp_path / "coarse.mesh"
    assert main(["mesh", "agglomerate", str(fine), "--n", "10", "-o", str(coarse)]) == 0
    m = load_mesh(coarse)
    assert m.n_elements == 10
    assert m.domain_area == pytest.approx(1.0)
    capsys.readouterr()
    assert main(["mesh", "check", str(coarse)]) == 0
    assert capsys.readouterr().out.strip().endswith("ok")
    cart = tmp_path / "cart.mesh"
    assert main(["mesh", "gen", "--kind", "cartesian", "--nx", "3", "--ny", "2", "-o", str(cart)]) == 0
    assert load_mesh(cart).n_elements == 6


def test_oracle_dump(tmp_path):
    cfg = _write(tmp_path)
    assert main(["oracle", "dump-matrices", str(cfg), "-o", str(tmp_path / "mats")]) == 0
    n = 20 * 3
    M = load_coo(tmp_path / "mats" / "M.txt", n).toarray()
    A = load_coo(tmp_path / "mats" / "A.txt", n).toarray()
    assert np.abs(M - M.T).max() <= 1e-14
    assert np.linalg.eigvalsh(M).min() > 0
    assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
    ev = np.linalg.eigvalsh(A)
    assert ev.min() >= -1e-10 * ev.max() and abs(ev[0]) <= 1e-10 * ev.max()
    F = np.loadtxt(tmp_path / "mats" / "F.txt")
    assert F.shape == (n, 2) and np.all(F[:, 0] == np.arange(n))
