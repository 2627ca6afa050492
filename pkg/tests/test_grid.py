import numpy as np
import pytest
import scipy.linalg

from compactness_lab.grid import (DirichletEigenbasis, Grid, RasterDomain,
                                  ScalarField, StaggeredVectorField,
                                  dirichlet_laplacian, divergence, gradient,
                                  h_m_norm_dual_weight, h_minus_m_norm, inner,
                                  lp_norm, read_grid_file, staggered_inner,
                                  write_grid_file)
from compactness_lab.movedom import make_domain


def test_grid_invariants():
    g = Grid((64, 32), (2.0, 1.0))
    assert g.dim == 2
    assert g.spacing == (2.0 / 64, 1.0 / 32)
    assert g.n_cells == 64 * 32
    with pytest.raises(ValueError):
        Grid((0,), (1.0,))
    with pytest.raises(ValueError):
        Grid((8, 8), (1.0, -1.0))


def test_lp_norm_zero_field():
    g = Grid((32, 32), (1.0, 1.0))
    assert lp_norm(ScalarField.constant(g, 0.0), 2) == 0.0


def test_lp_norm_unit_constant_unit_square():
    g = Grid((64, 64), (1.0, 1.0))
    assert lp_norm(ScalarField.constant(g, 1.0), 2) == pytest.approx(1.0, abs=1e-14)


def test_lp_norm_sine_analytic():
    # integral of sin^2 over [0,1] is 1/2; midpoint rule is exact enough at 1024
    for cells in (512, 1024):
        g = Grid((cells,), (1.0,))
        f = ScalarField.from_function(g, lambda p: np.sin(2 * np.pi * p[:, 0]))
        assert lp_norm(f, 2) == pytest.approx(1 / np.sqrt(2), abs=1e-4)


def test_lp_norm_rejects_bad_exponent():
    g = Grid((8,), (1.0,))
    with pytest.raises(ValueError):
        lp_norm(ScalarField.constant(g, 1.0), 0.5)


def test_lp_norm_inf():
    g = Grid((16,), (1.0,))
    f = ScalarField(g, np.linspace(-3.0, 2.0, 16))
    assert lp_norm(f, np.inf) == 3.0


def test_quadrature_consistency_on_raster():
    g = Grid((128, 128), (1.0, 1.0))
    disk = make_domain("disk:0.3", g)
    mu = disk.measure
    for p in (1, 2, 3):
        f = ScalarField.constant(g, -2.5, mask=disk)
        assert lp_norm(f, p) == pytest.approx(2.5 * mu ** (1.0 / p), rel=1e-12)


def test_gradient_of_constant_vanishes():
    g = Grid((32, 32), (1.0, 1.0))
    grad = gradient(ScalarField.constant(g, 4.2))
    assert all(np.max(np.abs(c)) == 0.0 for c in grad.components)


def test_divergence_of_constant_field():
    g = Grid((32, 32), (1.0, 1.0))
    u = StaggeredVectorField.constant(g, (1.0, 0.0))
    assert np.max(np.abs(divergence(u).values)) == 0.0


def test_gradient_linear_exact():
    g = Grid((32, 32), (1.0, 1.0))
    f = ScalarField.from_function(g, lambda p: p[:, 0])
    grad = gradient(f)
    assert np.allclose(grad.components[0][1:-1, :], 1.0, atol=1e-13)
    assert np.max(np.abs(grad.components[1])) < 1e-13


def test_gradient_divergence_skew_adjoint():
    # <div u, f> = -<u, grad f> exactly for zero-boundary face data
    g = Grid((24, 40), (1.0, 2.0))
    rng = np.random.default_rng(0)
    f = ScalarField(g, rng.normal(size=g.shape))
    ux = rng.normal(size=(25, 40))
    uy = rng.normal(size=(24, 41))
    ux[0, :] = ux[-1, :] = 0.0
    uy[:, 0] = uy[:, -1] = 0.0
    u = StaggeredVectorField(g, (ux, uy))
    lhs = inner(divergence(u), f)
    rhs = -staggered_inner(u, gradient(f))
    assert abs(lhs - rhs) <= 1e-12 * (abs(lhs) + 1.0)


def test_gradient_never_crosses_mask():
    g = Grid((64, 64), (1.0, 1.0))
    disk = make_domain("disk:0.3", g)
    f = ScalarField.constant(g, 1.0, mask=disk)
    grad = gradient(f)
    # inside the mask f is constant, so every face value must vanish: faces
    # crossing the boundary would otherwise see the 1 -> 0 jump
    assert all(np.max(np.abs(c)) == 0.0 for c in grad.components)


def test_masked_cells_hold_exact_zero():
    g = Grid((32, 32), (1.0, 1.0))
    disk = make_domain("disk:0.3", g)
    f = ScalarField.constant(g, 7.0, mask=disk)
    assert np.all(f.values[~disk.inside] == 0.0)


def test_h_minus_m_zero_field():
    g = Grid((64,), (1.0,))
    d = RasterDomain.full(g)
    assert h_minus_m_norm(ScalarField.constant(g, 0.0), 2, d) == 0.0


def test_h_minus_m_m0_equals_l2():
    g = Grid((48, 48), (1.0, 1.0))
    d = make_domain("disk:0.35", g)
    rng = np.random.default_rng(1)
    f = ScalarField(g, rng.normal(size=g.shape), mask=d)
    assert h_minus_m_norm(f, 0, d) == pytest.approx(lp_norm(f, 2), rel=1e-10)


def test_h_minus_m_first_eigenfunction():
    # oracle: dense eigensolve on a small grid, run before trusting the library path
    g = Grid((256,), (1.0,))
    d = RasterDomain.full(g)
    L, _ = dirichlet_laplacian(d)
    lam, vec = scipy.linalg.eigh(L.toarray())
    vol = g.cell_volume
    e1 = vec[:, 0] / np.sqrt(vol)
    f = ScalarField(g, e1)
    expected = lp_norm(f, 2) / np.sqrt(1.0 + lam[0])
    assert h_minus_m_norm(f, 1, d) == pytest.approx(expected, rel=1e-10)
    # the analytic eigenfunction sin(pi x) against the analytic eigenvalue pi^2
    f_sin = ScalarField.from_function(g, lambda p: np.sin(np.pi * p[:, 0]))
    target = lp_norm(f_sin, 2) / np.sqrt(1.0 + np.pi ** 2)
    assert h_minus_m_norm(f_sin, 1, d) == pytest.approx(target, rel=0.01)


def test_h_minus_m_monotone_in_m():
    g = Grid((40, 40), (1.0, 1.0))
    d = make_domain("disk:0.4", g)
    rng = np.random.default_rng(3)
    f = ScalarField(g, rng.normal(size=g.shape), mask=d)
    vals = [h_minus_m_norm(f, m, d) for m in range(4)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals[:-1], vals[1:]))


def test_h_minus_m_duality_bound():
    g = Grid((32, 32), (1.0, 1.0))
    d = make_domain("disk:0.4", g)
    rng = np.random.default_rng(4)
    for _ in range(10):
        f = ScalarField(g, rng.normal(size=g.shape), mask=d)
        phi = ScalarField(g, rng.normal(size=g.shape), mask=d)
        lhs = abs(inner(f, phi))
        m = 2
        rhs = h_minus_m_norm(f, m, d) * h_m_norm_dual_weight(phi, m, d)
        assert rhs - lhs >= -1e-9 * (rhs + 1.0)


def test_truncated_basis_reports_tail():
    g = Grid((40, 40), (1.0, 1.0))
    d = make_domain("disk:0.45", g)
    basis = DirichletEigenbasis(d, n_pairs=64)
    assert basis.truncated
    rng = np.random.default_rng(5)
    f = ScalarField(g, rng.normal(size=g.shape), mask=d)
    assert basis.tail_mass(f) > 0.0


def test_grid_file_roundtrip(tmp_path):
    g = Grid((16, 8), (2.0, 1.0))
    rng = np.random.default_rng(6)
    f = ScalarField(g, rng.normal(size=g.shape))
    path = tmp_path / "field.grid"
    write_grid_file(path, f)
    back = read_grid_file(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
