import numpy as np
import pytest
import scipy.sparse as sp

from twophase import assembly
from twophase.linalg import (
    ConvergenceError,
    FactorizationError,
    cg_solve,
    factorize_indefinite,
    factorize_spd,
)
from twophase.problems import example2_spec


def laplacian_1d(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr")


def test_spd_solve(rng):
    A = laplacian_1d(200) + sp.diags(rng.uniform(0, 1, 200))
    b = rng.normal(size=200)
    x = factorize_spd(A).solve(b)
    assert np.linalg.norm(A @ x - b) < 1e-10 * np.linalg.norm(b)


def test_stiffness_needs_dirichlet_rows():
    m = example2_spec().mesh(2)
    K = assembly.p1_stiffness(m)
    with pytest.raises(FactorizationError):
        factorize_spd(K)
    inner = m.interior_nodes
    factorize_spd(K[inner][:, inner])


def test_indefinite_rejected():
    A = sp.diags([1.0, -1.0, 2.0])
    with pytest.raises(FactorizationError):
        factorize_spd(A)


def test_nonsymmetric_rejected():
    A = sp.csr_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    with pytest.raises(FactorizationError):
        factorize_spd(A)


def test_bad_rhs_length():
    f = factorize_spd(laplacian_1d(5))
    with pytest.raises(ValueError):
        f.solve(np.ones(4))


def test_saddle_point_solve(rng):
    n, k = 30, 10
    A = laplacian_1d(n)
    B = sp.random(k, n, density=0.3, random_state=1) + sp.eye(k, n)
    K = sp.bmat([[A, B.T], [B, None]], format="csc")
    b = rng.normal(size=n + k)
    x = factorize_indefinite(K).solve(b)
    assert np.linalg.norm(K @ x - b) < 1e-10 * np.linalg.norm(b)


def test_cg_matches_direct(rng):
    A = laplacian_1d(50)
    b = rng.normal(size=50)
    x, its = cg_solve(lambda v: A @ v, b, tol=1e-12, maxit=200)
    assert its <= 50 + 5
    np.testing.assert_allclose(x, factorize_spd(A).solve(b), atol=1e-9)


def test_cg_zero_rhs():
    x, its = cg_solve(lambda v: 2 * v, np.zeros(4))
    assert its == 0 and not x.any()


def test_cg_iteration_limit_keeps_best():
    A = laplacian_1d(100)
    b = np.ones(100)
    with pytest.raises(ConvergenceError) as info:
        cg_solve(lambda v: A @ v, b, tol=1e-14, maxit=3)
    assert info.value.iterations == 3
    assert info.value.x is not None and info.value.residual <= 1


def test_cg_negative_curvature():
    with pytest.raises(ConvergenceError):
        cg_solve(lambda v: -v, np.ones(3))
