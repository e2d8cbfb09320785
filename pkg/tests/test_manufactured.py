import math

import numpy as np
import pytest

from polyfk import manufactured
from polyfk.mesh import generate_voronoi_mesh

UNIT = (0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="module")
def case():
    return manufactured.testcase1()


def test_exact_values(case):
    assert case.exact(0.0, 0.0, 0.0) == pytest.approx(3.0)
    assert case.exact(1.0, 0.0, 0.0) == pytest.approx(1.0)
    assert case.exact(0.5, 0.3, math.log(2.0)) == pytest.approx(1.0)


def test_time_derivative_and_gradient_by_fd(case, rng):
    x, y = rng.uniform(0, 1, (2, 20))
    t = rng.uniform(0, 1, 20)
    h = 1e-6
    dt = (case.exact(x, y, t + h) - case.exact(x, y, t - h)) / (2 * h)
    np.testing.assert_allclose(case.dc_dt(x, y, t), dt, atol=1e-8)
    np.testing.assert_allclose(case.dc_dt(x, y, t), -case.exact(x, y, t), rtol=1e-14)
    gx = (case.exact(x + h, y, t) - case.exact(x - h, y, t)) / (2 * h)
    gy = (case.exact(x, y + h, t) - case.exact(x, y - h, t)) / (2 * h)
    np.testing.assert_allclose(case.grad(x, y, t), np.stack([gx, gy], axis=-1), atol=1e-8)


def test_forcing_matches_fd_residual(rng):
    case = manufactured.testcase1(d_ext=0.7, alpha=1.3)
    x, y = rng.uniform(0.05, 0.95, (2, 20))
    t = rng.uniform(0, 1, 20)
    h = 1e-4
    c = case.exact
    lap = (c(x + h, y, t) + c(x - h, y, t) + c(x, y + h, t) + c(x, y - h, t) - 4 * c(x, y, t)) / h**2
    ct = (c(x, y, t + h) - c(x, y, t - h)) / (2 * h)
    u = c(x, y, t)
    f_fd = ct - 0.7 * lap - 1.3 * u * (1 - u)
    np.testing.assert_allclose(case.forcing(x, y, t), f_fd, atol=1e-6)
    assert np.abs(case.residual(x, y, t)).max() <= 1e-10


def test_params_wiring(case):
    P = case.params()
    assert P.alpha(np.array(0.3), np.array(0.4), 0.0) == pytest.approx(1.0)
    assert P.dirichlet(np.array(0.0), np.array(0.0), 1.0) == pytest.approx(3.0 * math.exp(-1.0))


def test_small_convergence_sweep(case):
    meshes = [generate_voronoi_mesh(UNIT, n, 30, 7) for n in (30, 100)]
    h_tables, p_tables, runs = manufactured.run_convergence(case, meshes, [1, 2], 1e-4, 1e-3)
    assert set(runs) == {(0, 1), (0, 2), (1, 1), (1, 2)}
    # coarse pair is pre-asymptotic; the asymptotic rates are checked in the acceptance suite
    assert h_tables[1].rates[0] > 0.8
    assert h_tables[2].rates[0] > h_tables[1].rates[0] + 0.5
    assert p_tables[0].errors[1] < p_tables[0].errors[0]
    assert runs[(1, 2)].l2 < runs[(1, 2)].energy
