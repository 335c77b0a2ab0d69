import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fracwest.mesh1d import (BandMatrix, Mesh1D, SingularPivotError, TridiagonalFactor,
                             assemble_stiffness, assemble_weighted_mass, solve_tridiagonal)

cells = st.sampled_from([10, 20, 50, 100])


def test_mesh_basic():
    m = Mesh1D(10)
    assert m.n_nodes == 11 and m.n_free == 10
    assert m.h == pytest.approx(0.1)
    assert m.node_index(0.3) == 3
    with pytest.raises(ValueError):
        m.node_index(0.35)
    with pytest.raises(ValueError):
        Mesh1D(15)
    with pytest.raises(ValueError):
        m.field(np.zeros(5))


def test_stiffness_rows():
    m = Mesh1D(10)
    A = assemble_stiffness(m).toarray()
    h = m.h
    assert A.shape == (10, 10)
    np.testing.assert_allclose(A[4, 3:6], [-1 / h, 2 / h, -1 / h])
    np.testing.assert_allclose(A[-1, -2:], [-1 / h, 1 / h])
    np.testing.assert_allclose(A, A.T)


def test_mass_rows_unit_weight():
    m = Mesh1D(20)
    M = assemble_weighted_mass(m, np.ones(m.n_nodes)).toarray()
    h = m.h
    np.testing.assert_allclose(M[5, 4:7], [h / 6, 2 * h / 3, h / 6], rtol=1e-14)
    M2 = assemble_weighted_mass(m, 2 * np.ones(m.n_nodes)).toarray()
    np.testing.assert_array_equal(M2, 2 * M)


def _gauss_mass(mesh, w_nodal):
    """Dense weighted mass matrix by 5-point Gauss quadrature per cell."""
    xg, wg = np.polynomial.legendre.leggauss(5)
    n, h = mesh.n_nodes, mesh.h
    out = np.zeros((n, n))
    for c in range(mesh.n_cells):
        a = mesh.nodes[c]
        s = 0.5 * (xg + 1)
        phi = np.stack([1 - s, s])
        w = w_nodal[c] * (1 - s) + w_nodal[c + 1] * s
        loc = (phi * w * wg * 0.5 * h) @ phi.T
        out[c:c + 2, c:c + 2] += loc
    return out[1:, 1:]


def test_mass_hat_weight_against_gauss():
    m = Mesh1D(10)
    k = 4
    w = np.zeros(m.n_nodes)
    w[k] = 1.0
    M = assemble_weighted_mass(m, w).toarray()
    np.testing.assert_allclose(M, _gauss_mass(m, w), atol=1e-15)
    rows, cols = np.nonzero(M)
    # free-node numbering is shifted by one
    assert set(rows + 1) <= {k - 1, k, k + 1} and set(cols + 1) <= {k - 1, k, k + 1}


@given(cells, st.integers(0, 2**32 - 1))
def test_mass_matches_gauss_random_weight(n, seed):
    m = Mesh1D(n)
    w = np.random.default_rng(seed).uniform(0.1, 3.0, m.n_nodes)
    np.testing.assert_allclose(assemble_weighted_mass(m, w).toarray(), _gauss_mass(m, w),
                               rtol=1e-12, atol=1e-15)


def test_mass_rejects_nonfinite():
    m = Mesh1D(10)
    w = np.ones(m.n_nodes)
    w[3] = np.nan
    with pytest.raises(ValueError):
        assemble_weighted_mass(m, w)


def test_solve_identity():
    n = 7
    eye = BandMatrix(np.zeros(n - 1), np.ones(n), np.zeros(n - 1))
    r = np.arange(n, dtype=float)
    np.testing.assert_array_equal(solve_tridiagonal(eye, r), r)


@given(cells, st.integers(0, 2**32 - 1))
def test_solve_roundtrip(n, seed):
    m = Mesh1D(n)
    A = assemble_stiffness(m)
    v = np.random.default_rng(seed).standard_normal(m.n_free)
    np.testing.assert_allclose(solve_tridiagonal(A, A.matvec(v)), v, atol=1e-10)
    np.testing.assert_allclose(TridiagonalFactor(A).solve(A.matvec(v)), v, atol=1e-10)


def test_zero_diagonal_pivot_error():
    z = BandMatrix(np.zeros(3), np.zeros(4), np.zeros(3))
    with pytest.raises(SingularPivotError):
        solve_tridiagonal(z, np.ones(4))


@given(arrays(float, 12, elements=st.floats(-1e3, 1e3)))
def test_matvec_matches_dense(v):
    m = Mesh1D(10)
    B = assemble_weighted_mass(m, np.linspace(1, 2, 11)) + assemble_stiffness(m) * 0.5
    np.testing.assert_allclose(B.matvec(v[:10]), B.toarray() @ v[:10], rtol=1e-12, atol=1e-9)


@given(cells)
def test_mass_total_and_stiffness_nullspace(n):
    # free hats sum to 1 - phi_0, so the entries of M_1 sum to int (1 - phi_0)^2 = 1 - 2h/3
    m = Mesh1D(n)
    M = assemble_weighted_mass(m, np.ones(m.n_nodes)).toarray()
    assert M.sum() == pytest.approx(1.0 - 2.0 * m.h / 3.0, rel=1e-12)
    # A applied to x vanishes on all rows but the Neumann one, which carries the flux 1
    A = assemble_stiffness(m).toarray()
    r = A @ m.nodes[1:]
    np.testing.assert_allclose(r[:-1], 0.0, atol=1e-10)
    assert r[-1] == pytest.approx(1.0)
