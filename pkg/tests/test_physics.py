import numpy as np
import pytest

from polyfk.errors import InputError
from polyfk.physics import (
    Field,
    ModelParams,
    VectorField,
    diffusion_tensor,
    load_field_table,
    save_field_table,
    synthetic_fiber_field,
)


def test_identity_tensor():
    P = ModelParams(d_ext=1.0)
    np.testing.assert_array_equal(diffusion_tensor(P, np.array([0.3, 0.4])), np.eye(2))


def test_axonal_tensor_along_x():
    P = ModelParams(d_ext=8.0, d_axn=80.0, fiber=synthetic_fiber_field("constant", theta=0.0))
    np.testing.assert_allclose(diffusion_tensor(P, np.array([1.0, 2.0])), np.diag([88.0, 8.0]), atol=1e-13)


def test_random_fiber_eigenvalues_and_ellipticity(rng):
    for _ in range(20):
        th = rng.uniform(0, 2 * np.pi)
        de, da = rng.uniform(0.1, 5), rng.uniform(0, 50)
        P = ModelParams(d_ext=de, d_axn=da, fiber=synthetic_fiber_field("constant", theta=th))
        x = rng.uniform(-1, 1, (30, 2))
        D = P.diffusion(x[:, 0], x[:, 1])
        assert np.abs(D - np.swapaxes(D, -1, -2)).max() <= 1e-14
        ev = np.linalg.eigvalsh(D)
        np.testing.assert_allclose(ev, np.broadcast_to([de, de + da], ev.shape), atol=1e-12 * (de + da))
        xi = rng.normal(size=(30, 2))
        q = np.einsum("qa,qab,qb->q", xi, D, xi)
        assert np.all(q >= de * np.sum(xi**2, axis=1) * (1 - 1e-12))


def test_fiber_fields(rng):
    assert np.allclose(synthetic_fiber_field("constant", theta=0.0)(np.array(2.0), np.array(-1.0)), [1, 0])
    rad = synthetic_fiber_field("radial", center=(0, 0))
    np.testing.assert_allclose(rad(np.array(3.0), np.array(4.0)), [0.6, 0.8], atol=1e-15)
    circ = synthetic_fiber_field("circular", center=(0, 0))
    x, y = rng.uniform(-3, 3, (2, 200))
    assert np.abs(np.sum(rad(x, y) * circ(x, y), axis=-1)).max() <= 1e-12
    np.testing.assert_allclose(np.linalg.norm(circ(x, y), axis=-1), 1.0, atol=1e-14)
    np.testing.assert_array_equal(rad(np.array(0.0), np.array(0.0)), [1.0, 0.0])
    np.testing.assert_array_equal(circ(np.array(0.0), np.array(0.0)), [1.0, 0.0])


def test_params_validation():
    with pytest.raises(InputError):
        ModelParams(d_ext=-1.0)
    with pytest.raises(InputError):
        ModelParams(d_ext=0.0, d_axn=0.0)
    with pytest.raises(InputError):
        ModelParams(d_ext=1.0, d_axn=2.0)


def test_expression_fields():
    f = Field.expression("sin(pi * x) * exp(-t) + y")
    assert f(np.array(0.5), np.array(2.0), 0.0) == pytest.approx(3.0)
    assert f.time_dependent
    g = Field.expression("x + y")
    assert not g.time_dependent
    with pytest.raises(InputError):
        Field.expression("__import__('os').system('true')")
    with pytest.raises(InputError):
        Field.expression("x +")


def test_constant_and_table_fields(tmp_path):
    c = Field.constant(0.9)
    np.testing.assert_array_equal(c(np.zeros(3), np.zeros(3)), 0.9)
    path = tmp_path / "alpha.txt"
    save_field_table([0.1, 0.2, 0.3], path)
    assert path.read_text().splitlines()[0] == "field per-element 3"
    f = load_field_table(path)
    np.testing.assert_allclose(f(np.zeros(3), np.zeros(3), 0.0, np.array([2, 0, 1])), [0.3, 0.1, 0.2])
    vpath = tmp_path / "fiber.txt"
    save_field_table([[3.0, 4.0], [0.0, 2.0]], vpath)
    v = load_field_table(vpath)
    assert isinstance(v, VectorField)
    np.testing.assert_allclose(v(np.zeros(2), np.zeros(2), 0.0, np.array([0, 1])), [[0.6, 0.8], [0.0, 1.0]])


def test_table_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("field per-element 2\n1.0\n")
    with pytest.raises(InputError):
        load_field_table(bad)
    bad.write_text("scalar 2\n1\n2\n")
    with pytest.raises(InputError):
        load_field_table(bad)


def test_check_at_rejects_non_unit_fibers():
    fib = VectorField(lambda x, y, t, elem: np.stack([2 * np.ones_like(x), np.zeros_like(x)], axis=-1))
    P = ModelParams(d_ext=1.0, d_axn=1.0, fiber=fib)
    with pytest.raises(InputError):
        P.check_at(np.zeros(3), np.zeros(3))
