import math

import numpy as np
import pytest

from polyfk.analysis import (
    ActivationProbe,
    activation_time,
    convergence_rates,
    dg_error,
    dg_norm,
    elements_in_box,
    energy_error,
    l2_error,
    l2_norm,
    log_linear_fit,
    make_rate_table,
    read_csv,
    region_mean,
    write_activation,
    write_rate_table,
    write_series,
)
from polyfk.assembly import PenaltySpec, project_l2
from polyfk.dgspace import DgSpace
from polyfk.errors import ContractError
from polyfk.mesh import generate_cartesian_mesh
from polyfk.physics import Field, ModelParams
from polyfk.timestepper import Trajectory

UNIT = (0.0, 1.0, 0.0, 1.0)


def _traj(space, times, states, **kw):
    return Trajectory(times=list(times), states=list(states), space=space, final_state=states[-1], final_time=times[-1], **kw)


def test_rates_simple():
    assert convergence_rates([1.0, 0.5], [1.0, 0.25]) == pytest.approx([2.0])
    h = np.array([0.4, 0.2, 0.1, 0.05])
    assert convergence_rates(h, 7 * h**3) == pytest.approx([3.0, 3.0, 3.0])


def test_rates_scale_invariant(rng):
    h = np.sort(rng.uniform(0.01, 1, 5))[::-1]
    e = rng.uniform(1e-6, 1, 5)
    a = convergence_rates(h, e)
    b = convergence_rates(3.7 * h, 0.02 * e)
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_rates_zero_error_excluded():
    r = convergence_rates([1.0, 0.5, 0.25], [1.0, 0.0, 0.1])
    assert all(math.isnan(v) for v in r)
    t = make_rate_table([1.0, 0.5, 0.25], [10, 40, 160], [1.0, 0.0, 0.1])
    assert t.notes == ["row 1 excluded: zero error"]
    with pytest.raises(ContractError):
        convergence_rates([1.0], [1.0])


def test_log_linear_fit():
    p = np.arange(1, 6)
    slope, r2 = log_linear_fit(p, 3.0 * np.exp(-1.7 * p))
    assert slope == pytest.approx(-1.7)
    assert r2 == pytest.approx(1.0)


def test_dg_norm_examples():
    S = DgSpace(generate_cartesian_mesh((0, 2, 0, 1), 2, 1, "neumann"), 1)
    P = ModelParams(d_ext=1.0)
    spec = PenaltySpec()
    assert dg_norm(S, P, spec, project_l2(S, Field.constant(4.0))) <= 1e-12
    assert dg_norm(S, P, spec, project_l2(S, Field.expression("x"))) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    P4 = ModelParams(d_ext=4.0)
    assert dg_norm(S, P4, spec, project_l2(S, Field.expression("x"))) == pytest.approx(2 * math.sqrt(2.0), rel=1e-12)


def test_dg_norm_jump_part():
    # piecewise constant 0 | 1 across x = 1: only the interior jump contributes
    S = DgSpace(generate_cartesian_mesh((0, 2, 0, 1), 2, 1, "neumann"), 1)
    C = project_l2(S, Field.per_element([0.0, 1.0]))
    eta = 10.0 * 1 / math.sqrt(2.0)
    assert dg_norm(S, ModelParams(), PenaltySpec(), C) == pytest.approx(math.sqrt(eta), rel=1e-12)


def test_dg_error_of_exact_polynomial_is_zero():
    S = DgSpace(generate_cartesian_mesh(UNIT, 2, 2), 2)
    C = project_l2(S, Field.expression("x * y + x**2"))
    exact = lambda x, y, t: x * y + x**2
    grad = lambda x, y, t: np.stack([y + 2 * x, x], axis=-1)
    assert dg_error(S, ModelParams(), PenaltySpec(), C, exact, grad, 0.0) <= 1e-11


def test_l2_examples():
    S = DgSpace(generate_cartesian_mesh(UNIT, 2, 2), 1)
    C = project_l2(S, Field.constant(2.0))
    assert l2_norm(S, C) == pytest.approx(2.0)
    assert l2_error(S, C, lambda x, y, t: np.full_like(x, 2.0 + t), 1.0) == pytest.approx(1.0)
    assert l2_error(S, C, lambda x, y, t: 2.0 + x) == pytest.approx(math.sqrt(1.0 / 3.0))


def test_energy_error_analytic():
    # c_h = 0 against c = exp(-t) x: ||e(T)||^2 = e^{-2T}/3, the DG part is the trapezoid of e^{-2t}
    S = DgSpace(generate_cartesian_mesh(UNIT, 1, 1, "neumann"), 1)
    times = np.linspace(0, 1, 11)
    dg2 = np.exp(-2 * times)
    integral = float(np.sum(0.5 * (dg2[1:] + dg2[:-1]) * np.diff(times)))
    tr = _traj(S, times, [np.zeros(S.n_dofs)] * 11, dg_integral=integral, error_integrand=list(dg2))
    e = energy_error(tr, lambda x, y, t: np.exp(-t) * x)
    assert e == pytest.approx(math.sqrt(math.exp(-2) / 3 + integral), rel=1e-12)
    with pytest.raises(ContractError):
        energy_error(_traj(S, times, [np.zeros(S.n_dofs)] * 11), lambda x, y, t: x)


def test_activation_time_examples():
    S = DgSpace(generate_cartesian_mesh((0, 2, 0, 1), 2, 1), 1)
    fields = [Field.per_element(v) for v in ([0.0, 0.0], [0.96, 0.5], [1.0, 0.97])]
    states = [project_l2(S, f) for f in fields]
    tr = _traj(S, [0.0, 0.5, 1.0], states)
    np.testing.assert_array_equal(activation_time(tr, 0.95), [0.5, 1.0])
    np.testing.assert_array_equal(activation_time(tr, 0.99), [1.0, np.inf])
    probe = ActivationProbe(S, 0.95)
    for t, C in zip(tr.times, tr.states):
        probe(t, C)
    np.testing.assert_array_equal(probe.t_hat, [0.5, 1.0])


def test_activation_monotone_in_threshold(rng):
    S = DgSpace(generate_cartesian_mesh(UNIT, 3, 3), 1)
    times = np.linspace(0, 1, 21)
    speed = rng.uniform(0.5, 2, 9)
    states = [project_l2(S, Field.per_element(np.minimum(1.0, speed * t))) for t in times]
    tr = _traj(S, times, states)
    prev = activation_time(tr, 0.3)
    for c in (0.5, 0.7, 0.9):
        cur = activation_time(tr, c)
        assert np.all(cur >= prev)
        prev = cur


def test_region_mean_and_box():
    m = generate_cartesian_mesh(UNIT, 2, 2)
    S = DgSpace(m, 1)
    C = project_l2(S, Field.expression("x + y"))
    tr = _traj(S, [0.0, 1.0], [C, 2 * C])
    np.testing.assert_allclose(region_mean(tr, np.arange(4)), [1.0, 2.0], rtol=1e-12)
    left = elements_in_box(m, (0, 0.5, 0, 1))
    assert len(left) == 2
    np.testing.assert_allclose(region_mean(tr, left), [0.75, 1.5], rtol=1e-12)
    with pytest.raises(ContractError):
        region_mean(tr, [])
    with pytest.raises(ContractError):
        region_mean(tr, [7])


def test_csv_writers(tmp_path):
    t = make_rate_table([0.5, 0.25], [12, 48], [0.1, 0.025], "p1")
    write_rate_table(t, tmp_path / "rates.csv")
    rows = read_csv(tmp_path / "rates.csv")
    assert rows[0]["rate"] == "" and float(rows[1]["rate"]) == pytest.approx(2.0)
    write_activation(np.array([0.5, np.inf]), tmp_path / "act.csv")
    rows = read_csv(tmp_path / "act.csv")
    assert rows[1] == {"element_id": "1", "t_hat": "inf"}
    write_series([0.0, 0.1], [1.0, 2.0], tmp_path / "s.csv", name="mass")
    assert [float(r["mass"]) for r in read_csv(tmp_path / "s.csv")] == [1.0, 2.0]
