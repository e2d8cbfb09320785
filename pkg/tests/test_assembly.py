import numpy as np
import pytest
import scipy.sparse.linalg as spla
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as Pn
from scipy.signal import convolve2d

from dense_oracle import dense_dg_norm, dense_load, dense_operators, rects_from_mesh
from polyfk.analysis import dg_norm
from polyfk.assembly import (
    PenaltySpec,
    assemble_linear_reaction,
    assemble_load,
    assemble_mass,
    assemble_nonlinear_reaction,
    assemble_stiffness,
    audit_symmetry,
    coupling_is_local,
    dump_coo,
    load_coo,
    penalty,
    project_l2,
    symmetry_defect,
)
from polyfk.dgspace import DgSpace
from polyfk import manufactured
from polyfk.errors import ContractError
from polyfk.mesh import PolyMesh, generate_cartesian_mesh, generate_voronoi_mesh, side_tagger
from polyfk.physics import Field, ModelParams, synthetic_fiber_field

UNIT = (0.0, 1.0, 0.0, 1.0)
MIXED = {"left": "dirichlet", "right": "neumann", "bottom": "dirichlet", "top": "neumann"}
ORACLE_MESHES = [(UNIT, 1, 1), ((0.0, 2.0, 0.0, 1.0), 2, 1), ((0.0, 1.0, 0.0, 0.5), 2, 2)]


def anisotropic(alpha=0.9, theta=0.3):
    n = np.array([np.cos(theta), np.sin(theta)])
    P = ModelParams(d_ext=1.0, d_axn=0.5, fiber=synthetic_fiber_field("constant", theta=theta), alpha=alpha)
    return P, np.eye(2) + 0.5 * np.outer(n, n)


# -- penalty ------------------------------------------------------------------
def test_penalty_interior_and_dirichlet():
    m = generate_cartesian_mesh((0, 2, 0, 1), 2, 1)
    S = DgSpace(m, 2)
    f = m.face(int(np.flatnonzero(m.interior)[0]))
    assert penalty(f, S, PenaltySpec(10.0)) == pytest.approx(40 / np.sqrt(2), rel=1e-14)
    sq = generate_cartesian_mesh(UNIT, 1, 1)
    assert penalty(sq.face(0), DgSpace(sq, 1), PenaltySpec(10.0)) == pytest.approx(10 / np.sqrt(2), rel=1e-14)


def test_penalty_neumann_and_bad_eta():
    m = generate_cartesian_mesh(UNIT, 1, 1, "neumann")
    with pytest.raises(ContractError):
        penalty(m.face(0), DgSpace(m, 1), PenaltySpec())
    with pytest.raises(ContractError):
        PenaltySpec(0.0)


def test_harmonic_mean_of_equal_diameters():
    sq = generate_cartesian_mesh(UNIT, 3, 3)
    S = DgSpace(sq, 1)
    for f in np.flatnonzero(sq.interior):
        assert penalty(sq.face(f), S, PenaltySpec(1.0)) == pytest.approx(1 / sq.element_diameters[0])


# -- mass and reaction -----------------------------------------------------------
def _poly_coeffs(space, e, i):
    """Power-basis coefficients of basis ``i`` of element ``e`` in box coordinates."""
    a, b = space.exponents[i]
    ca = np.zeros(a + 1)
    ca[a] = np.sqrt(2 * a + 1)
    cb = np.zeros(b + 1)
    cb[b] = np.sqrt(2 * b + 1)
    return np.outer(L.leg2poly(ca), L.leg2poly(cb))


def _green(P, c):
    """Exact ``int_P sum c[a, b] u^a v^b`` by Green's theorem."""
    g, w = L.leggauss(20)
    t = 0.5 * (g + 1)
    cx = Pn.polyint(c, axis=0)
    total = 0.0
    for k in range(len(P)):
        p0, p1 = P[k], P[(k + 1) % len(P)]
        u = p0[0] + t * (p1[0] - p0[0])
        v = p0[1] + t * (p1[1] - p0[1])
        total += 0.5 * np.sum(w * Pn.polyval2d(u, v, cx)) * (p1[1] - p0[1])
    return total


def test_mass_pentagon_matches_green_integrals():
    ang = 0.3 + 2 * np.pi * np.arange(5) / 5
    P = np.column_stack([1.3 * np.cos(ang), np.sin(ang)])
    m = PolyMesh(P, [range(5)], lambda mid, n: "dirichlet")
    S = DgSpace(m, 2)
    M = assemble_mass(S).toarray()
    x0, x1, y0, y1 = m.bboxes[0]
    hx, hy = 0.5 * (x1 - x0), 0.5 * (y1 - y0)
    Q = np.column_stack([(P[:, 0] - 0.5 * (x0 + x1)) / hx, (P[:, 1] - 0.5 * (y0 + y1)) / hy])
    ref = np.empty_like(M)
    for i in range(S.n_local):
        for j in range(S.n_local):
            c = convolve2d(_poly_coeffs(S, 0, i), _poly_coeffs(S, 0, j))
            ref[i, j] = _green(Q, c) * hx * hy / (4 * hx * hy)
    np.testing.assert_allclose(M, ref, atol=1e-12)


def test_mass_unit_square_is_identity(square):
    np.testing.assert_allclose(assemble_mass(DgSpace(square, 3)).toarray(), np.eye(10), atol=1e-13)


def test_mass_of_constant_gives_area(voronoi30):
    S = DgSpace(voronoi30, 2)
    C = project_l2(S, Field.constant(1.0))
    assert C @ (assemble_mass(S) @ C) == pytest.approx(1.0, abs=1e-12)


def test_mass_spd(voronoi30, rng):
    S = DgSpace(voronoi30, 2)
    M = assemble_mass(S)
    assert symmetry_defect(M) <= 1e-12
    X = rng.normal(size=(100, S.n_dofs))
    assert np.all(np.einsum("ki,ki->k", X, (M @ X.T).T) > 0)
    b = rng.normal(size=S.n_dofs)
    x, info = spla.cg(M, b, rtol=1e-12, maxiter=2000)
    assert info == 0
    assert np.linalg.norm(M @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_linear_reaction_scalings(voronoi30):
    S = DgSpace(voronoi30, 2)
    M = assemble_mass(S)
    d1 = assemble_linear_reaction(S, ModelParams(alpha=1.0)) - M
    assert abs(d1).max() <= 1e-13
    d2 = assemble_linear_reaction(S, ModelParams(alpha=0.9)) - 0.9 * M
    assert abs(d2).max() <= 1e-13


def test_linear_reaction_alpha_x_analytic(square):
    Ma = assemble_linear_reaction(DgSpace(square, 1), ModelParams(alpha="x")).toarray()
    r = 1 / (2 * np.sqrt(3))
    np.testing.assert_allclose(Ma, [[0.5, r, 0], [r, 0.5, 0], [0, 0, 0.5]], atol=1e-14)


def test_nonlinear_reaction_properties(voronoi30, rng):
    S = DgSpace(voronoi30, 2)
    P = ModelParams(alpha=0.7)
    assert abs(assemble_nonlinear_reaction(S, P, np.zeros(S.n_dofs))).max() == 0
    kappa = 0.37
    Ck = project_l2(S, Field.constant(kappa))
    d = assemble_nonlinear_reaction(S, P, Ck) - kappa * assemble_linear_reaction(S, P)
    assert abs(d).max() <= 1e-12
    a, b = rng.normal(size=(2, S.n_dofs))
    lin = assemble_nonlinear_reaction(S, P, 2 * a - 3 * b) - 2 * assemble_nonlinear_reaction(S, P, a) + 3 * assemble_nonlinear_reaction(S, P, b)
    assert abs(lin).max() <= 1e-12
    assert symmetry_defect(assemble_nonlinear_reaction(S, P, a)) <= 1e-12
    with pytest.raises(ContractError):
        assemble_nonlinear_reaction(S, P, np.zeros(3))


# -- stiffness ------------------------------------------------------------------
def test_constant_in_kernel_under_neumann(voronoi30):
    m = generate_voronoi_mesh(UNIT, 30, 100, 42, "neumann")
    for p in (1, 2, 3):
        S = DgSpace(m, p)
        P, _ = anisotropic()
        A, _ = assemble_stiffness(S, P, PenaltySpec())
        C = project_l2(S, Field.constant(1.0))
        assert np.abs(A @ C).max() <= 1e-12 * abs(A).max()


def test_stiffness_symmetric_and_local(voronoi30):
    S = DgSpace(voronoi30, 3)
    P, _ = anisotropic()
    A, _ = assemble_stiffness(S, P, PenaltySpec())
    assert audit_symmetry(A, name="A") <= 1e-12
    assert coupling_is_local(S, A)


def test_coercivity_sampled(voronoi30, rng):
    for p in (1, 2):
        S = DgSpace(voronoi30, p)
        P = ModelParams(d_ext=1.0)
        spec = PenaltySpec(10.0)
        A, _ = assemble_stiffness(S, P, spec)
        q = []
        for _ in range(200):
            C = rng.normal(size=S.n_dofs)
            q.append(C @ (A @ C) / dg_norm(S, P, spec, C) ** 2)
        assert min(q) > 0


def test_symmetry_audit_rejects():
    import scipy.sparse as sp

    with pytest.raises(ContractError):
        audit_symmetry(sp.csr_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])))


# -- oracle equivalence ---------------------------------------------------------
@pytest.mark.parametrize("dom,nx,ny", ORACLE_MESHES)
@pytest.mark.parametrize("p", [1, 2])
def test_operators_match_dense_oracle(dom, nx, ny, p, rng):
    m = generate_cartesian_mesh(dom, nx, ny, MIXED)
    S = DgSpace(m, p)
    spec = PenaltySpec(10.0)
    tag = side_tagger(dom, MIXED)
    rects = rects_from_mesh(m)
    Cs = rng.normal(size=S.n_dofs)
    # variable alpha for M_alpha; constant alpha keeps the cubic nonlinear integrand within the quadrature order
    Pv, D = anisotropic(alpha="1 + x * y")
    M, A, Ma, _ = dense_operators(rects, p, D, lambda x, y: 1 + x * y, Cs, 10.0, tag)
    Pc, _ = anisotropic(alpha=0.9)
    _, _, _, N = dense_operators(rects, p, D, lambda x, y: 0.9 + 0 * x, Cs, 10.0, tag)
    got = {
        "M": assemble_mass(S),
        "A": assemble_stiffness(S, Pv, spec)[0],
        "M_alpha": assemble_linear_reaction(S, Pv),
        "M_tilde": assemble_nonlinear_reaction(S, Pc, Cs),
    }
    for name, ref in (("M", M), ("A", A), ("M_alpha", Ma), ("M_tilde", N)):
        assert np.abs(got[name].toarray() - ref).max() <= 1e-11, name


@pytest.mark.parametrize("p", [1, 2])
def test_load_matches_dense_oracle(p):
    dom = (0.0, 2.0, 0.0, 1.0)
    m = generate_cartesian_mesh(dom, 2, 1, MIXED)
    S = DgSpace(m, p)
    case = manufactured.testcase1()
    P, D = anisotropic()
    P.forcing = Field.function(case.forcing)
    P.dirichlet = Field.function(case.exact)
    F = assemble_load(S, P, 0.0, order=24, spec=PenaltySpec(10.0))
    ref = dense_load(
        rects_from_mesh(m), p, D, lambda x, y: case.forcing(x, y, 0.0), lambda x, y: case.exact(x, y, 0.0), 10.0, side_tagger(dom, MIXED)
    )
    assert np.abs(F - ref).max() <= 1e-11


@pytest.mark.parametrize("p", [1, 2])
def test_dg_norm_matches_dense_oracle(p, rng):
    dom = (0.0, 2.0, 0.0, 1.0)
    m = generate_cartesian_mesh(dom, 2, 1, MIXED)
    S = DgSpace(m, p)
    P, D = anisotropic()
    C = rng.normal(size=S.n_dofs)
    ref = dense_dg_norm(rects_from_mesh(m), p, D, C, 10.0, side_tagger(dom, MIXED))
    assert dg_norm(S, P, PenaltySpec(10.0), C) == pytest.approx(ref, abs=1e-11)


# -- loads and projection -----------------------------------------------------------
def test_zero_load(voronoi30):
    S = DgSpace(voronoi30, 2)
    assert np.all(assemble_load(S, ModelParams(), 0.0) == 0)


def test_unit_forcing_integrates_to_area():
    m = generate_voronoi_mesh(UNIT, 30, 50, 1, "neumann")
    S = DgSpace(m, 2)
    F = assemble_load(S, ModelParams(forcing=1.0), 0.0)
    assert F @ project_l2(S, Field.constant(1.0)) == pytest.approx(1.0, abs=1e-12)


def test_neumann_flux_load():
    m = generate_cartesian_mesh(UNIT, 2, 2, "neumann")
    S = DgSpace(m, 1)
    F = assemble_load(S, ModelParams(neumann=2.0), 0.0)
    assert F @ project_l2(S, Field.constant(1.0)) == pytest.approx(8.0, abs=1e-12)


def test_dirichlet_load_needs_spec(square):
    with pytest.raises(ContractError):
        assemble_load(DgSpace(square, 1), ModelParams(dirichlet=1.0), 0.0)


def test_projection_constant_and_linear(voronoi30, rng):
    S = DgSpace(voronoi30, 1)
    pts = rng.uniform(0, 1, (40, 2))
    C = project_l2(S, Field.constant(1.0))
    assert np.abs(S.point_values(C, pts) - 1).max() <= 1e-12
    C = project_l2(S, Field.expression("2 * x - 3 * y + 0.5"))
    assert np.abs(S.point_values(C, pts) - (2 * pts[:, 0] - 3 * pts[:, 1] + 0.5)).max() <= 1e-11


def test_projection_rate():
    from polyfk.analysis import l2_error

    g = Field.expression("cos(pi * x) * cos(pi * y) + 2")
    err, h = [], []
    for n in (100, 400):
        m = generate_voronoi_mesh(UNIT, n, 60, 5)
        S = DgSpace(m, 3)
        err.append(l2_error(S, project_l2(S, g), lambda x, y, t: g(x, y, t)))
        h.append(m.mesh_size)
    # 4x the cells halves h; a degree-3 projection gains at least 2^4
    assert err[0] / err[1] >= 2**4


def test_coo_round_trip(tmp_path, voronoi30):
    S = DgSpace(voronoi30, 1)
    A, _ = assemble_stiffness(S, ModelParams(), PenaltySpec())
    path = tmp_path / "A.txt"
    dump_coo(A, path)
    first = path.read_text().splitlines()[0].split()
    assert len(first) == 3 and int(first[0]) == 0
    B = load_coo(path, S.n_dofs)
    assert abs(A - B).max() == 0
