import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings, strategies as st

from conftest import discretization
from dgxfem.errors import NoConvergence
from dgxfem.forms import SchemeParams, assemble
from dgxfem.linalg import (BlockJacobi, SparseSystem, apply_dirichlet, csr_from_triplets,
                           solve_general, solve_spd, write_matrix_market)


def system(M, b):
    return SparseSystem(sp.csr_matrix(np.asarray(M, dtype=float)), np.asarray(b, dtype=float))


def test_identity_converges_in_one_step():
    x, rep = solve_spd(system(np.eye(5), np.eye(5)[0]))
    assert np.allclose(x, np.eye(5)[0]) and rep.iterations == 1


def test_two_by_two_spd():
    x, rep = solve_spd(system([[4, 1], [1, 3]], [1, 2]))
    assert np.allclose(x, [1 / 11, 7 / 11], atol=1e-12)
    assert rep.residual <= 1e-12


def test_permutation_with_gmres():
    x, rep = solve_general(system([[0, 1], [1, 0]], [1, 2]))
    assert np.allclose(x, [2, 1], atol=1e-14)
    assert rep.residual <= 1e-12


def test_zero_diagonal_rows_are_left_unscaled():
    P = BlockJacobi(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 4.0]])))
    assert np.allclose(P(np.array([3.0, 8.0])), [3.0, 2.0])


def test_gmres_on_plain_permutation_through_block():
    # a 2x2 block preconditioner inverts the permutation exactly
    s = SparseSystem(sp.csr_matrix(np.array([[1e-300, 1.0], [1.0, 1e-300]])), np.array([1.0, 2.0]),
                     blocks=[np.array([0, 1])])
    x, _ = solve_general(s)
    assert np.allclose(x, [2.0, 1.0], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31))
def test_gmres_matches_cg_on_spd(n, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((n, n))
    M = B @ B.T + n * np.eye(n)
    b = r.standard_normal(n)
    x1, _ = solve_spd(system(M, b))
    x2, _ = solve_general(system(M, b))
    assert np.allclose(x1, x2, atol=1e-10 * max(1, np.abs(x1).max()))
    assert np.allclose(M @ x1, b, atol=1e-9 * np.linalg.norm(b))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(0, 2**31))
def test_csr_round_trip(n, seed):
    r = np.random.default_rng(seed)
    k = 3 * n
    rows, cols = r.integers(0, n, k), r.integers(0, n, k)
    vals = r.standard_normal(k)
    A = csr_from_triplets(rows, cols, vals, n)
    dense = np.zeros((n, n))
    np.add.at(dense, (rows, cols), vals)
    assert np.allclose(A.toarray(), dense)
    assert A.has_sorted_indices


def test_dirichlet_elimination_keeps_symmetry_and_solution():
    r = np.random.default_rng(0)
    B = r.standard_normal((6, 6))
    M = B @ B.T + 6 * np.eye(6)
    xs = r.standard_normal(6)
    s = apply_dirichlet(sp.csr_matrix(M), M @ xs, [0, 4], xs[[0, 4]])
    assert abs(s.A - s.A.T).max() == 0
    x, _ = solve_spd(s)
    assert np.allclose(x, xs, atol=1e-12)
    assert not s.free[0] and s.free[1]


def test_no_convergence_reports_best_iterate():
    r = np.random.default_rng(1)
    B = r.standard_normal((40, 40))
    M = B @ B.T + 1e-6 * np.eye(40)
    with pytest.raises(NoConvergence) as exc:
        solve_spd(system(M, r.standard_normal(40)), maxit=3, max_restarts=0)
    assert exc.value.best is not None and exc.value.iterations is not None


def test_sipg_system_converges():
    d = discretization(16, 1)
    s = assemble(d["space"], d["part"], d["kappa"], d["problem"], SchemeParams.sipg())
    x, rep = solve_spd(s)
    assert rep.residual <= 1e-12
    xd = spla.spsolve(s.A.tocsc(), s.b)
    assert np.allclose(x, xd, atol=1e-8 * np.abs(xd).max())


def test_nipg_system_converges():
    d = discretization(16, 2)
    s = assemble(d["space"], d["part"], d["kappa"], d["problem"], SchemeParams.nipg())
    x, rep = solve_general(s)
    assert rep.residual <= 1e-12
    assert np.linalg.norm(s.A @ x - s.b) <= 1e-11 * np.linalg.norm(s.b)


def test_block_preconditioner_matches_dense_block_inverse():
    r = np.random.default_rng(2)
    B = r.standard_normal((5, 5))
    M = B @ B.T + 5 * np.eye(5)
    P = BlockJacobi(sp.csr_matrix(M), [np.array([1, 3])])
    v = r.standard_normal(5)
    z = P(v)
    assert np.allclose(z[[1, 3]], np.linalg.solve(M[np.ix_([1, 3], [1, 3])], v[[1, 3]]))
    assert np.allclose(z[[0, 2, 4]], v[[0, 2, 4]] / np.diag(M)[[0, 2, 4]])


def test_matrix_market_dump(tmp_path):
    from scipy.io import mmread

    s = system([[4, 1], [1, 3]], [1, 2])
    write_matrix_market(s, tmp_path / "a.mtx")
    assert np.allclose(mmread(str(tmp_path / "a.mtx")).toarray(), [[4, 1], [1, 3]])
