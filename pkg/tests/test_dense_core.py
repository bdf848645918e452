import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ricsolve import dense_core
from ricsolve.dense_core import (
    hamiltonian,
    log_norm_decay,
    omega_inv_norm,
    riccati_residual,
    solve_lyapunov_dense,
    solve_riccati_dense,
    stability_margin,
)
from ricsolve.errors import NotStableError, SingularOperatorError
from ricsolve.problem_io import gen_laplacian_problem


def kron_lyapunov(A, Q):
    """Brute-force oracle: (I (x) A^T + A^T (x) I) vec(X) = -vec(Q)."""
    m = A.shape[0]
    K = np.kron(np.eye(m), A.T) + np.kron(A.T, np.eye(m))
    return np.linalg.solve(K, -Q.reshape(-1, order="F")).reshape(m, m, order="F")


def stable_matrix(rng, m):
    G = rng.standard_normal((m, m))
    return G - (np.linalg.eigvals(G).real.max() + rng.uniform(0.2, 2.0)) * np.eye(m)


def test_lyapunov_scalar_and_commuting():
    assert solve_lyapunov_dense(np.array([[-1.0]]), np.array([[2.0]]))[0, 0] == pytest.approx(1.0)
    S = np.array([[2.0, 1, 0], [1, 3, 1], [0, 1, 4]])
    np.testing.assert_allclose(solve_lyapunov_dense(-np.eye(3), S), S / 2)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12))
def test_lyapunov_matches_kronecker(seed, m):
    rng = np.random.default_rng(seed)
    A = stable_matrix(rng, m)
    Q = rng.standard_normal((m, m))
    Q = Q + Q.T
    X = solve_lyapunov_dense(A, Q)
    ref = kron_lyapunov(A, Q)
    assert np.linalg.norm(X - ref) <= 1e-8 * max(np.linalg.norm(ref), 1e-300)
    res = A.T @ X + X @ A + Q
    assert np.linalg.norm(res) <= 1e-10 * (np.linalg.norm(A) * np.linalg.norm(X) + np.linalg.norm(Q))


def test_lyapunov_errors():
    with pytest.raises(SingularOperatorError):
        solve_lyapunov_dense(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(NotStableError):
        solve_lyapunov_dense(np.diag([1.0, 2.0]), np.eye(2))


def test_riccati_scalar_cases():
    y = solve_riccati_dense([[-1.0]], [[1.0]], [[1.0]])[0, 0]
    assert y == pytest.approx(np.sqrt(2) - 1, abs=1e-12)
    assert -1 - y == pytest.approx(-np.sqrt(2))
    assert solve_riccati_dense([[-1.0]], [[0.0]], [[np.sqrt(2)]])[0, 0] == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_riccati_random_contract(seed):
    rng = np.random.default_rng(seed)
    m = 10
    A = rng.standard_normal((m, m))
    B = rng.standard_normal((m, 2))
    C = rng.standard_normal((2, m))
    Y = solve_riccati_dense(A, B, C)
    scale = 2 * np.linalg.norm(A) * np.linalg.norm(Y) + np.linalg.norm(B) ** 2 * np.linalg.norm(Y) ** 2 \
        + np.linalg.norm(C) ** 2
    assert np.linalg.norm(riccati_residual(A, B, C, Y)) <= 1e-10 * scale
    assert np.linalg.eigvalsh(Y).min() >= -1e-10 * np.linalg.norm(Y, 2)
    assert stability_margin(A - B @ B.T @ Y) < 0
    np.testing.assert_array_equal(Y, Y.T)


def test_riccati_unstabilizable():
    with pytest.raises(dense_core.StabilizabilityError):
        solve_riccati_dense(np.diag([1.0, -1.0]), np.array([[0.0], [1.0]]), np.array([[1.0, 1.0]]))


def test_hamiltonian_structure():
    rng = np.random.default_rng(5)
    A, B, C = rng.standard_normal((6, 6)), rng.standard_normal((6, 2)), rng.standard_normal((3, 6))
    H = hamiltonian(A, B, C)
    J = np.block([[np.zeros((6, 6)), np.eye(6)], [-np.eye(6), np.zeros((6, 6))]])
    JH = J @ H
    assert np.linalg.norm(JH - JH.T) <= 1e-12 * np.linalg.norm(H)


def test_stability_margin():
    assert stability_margin(-np.eye(3)) == pytest.approx(-1)
    assert stability_margin(np.array([[0.0, 1], [-1, 0]])) == pytest.approx(0, abs=1e-15)
    A = gen_laplacian_problem(5, 1.0).A.toarray()
    assert stability_margin(A) == pytest.approx(-2 * (2 - 2 * np.cos(np.pi / 6)), rel=1e-12)


def test_omega_inv_norm():
    assert omega_inv_norm(np.array([[-1.0]])) == pytest.approx(0.5)
    assert omega_inv_norm(-3.0 * np.eye(4)) == pytest.approx(1 / 6)
    rng = np.random.default_rng(9)
    Acl = stable_matrix(rng, 6)
    H = kron_lyapunov(Acl, np.eye(6))
    assert omega_inv_norm(Acl) == pytest.approx(np.linalg.norm(H, 2), rel=1e-8)
    assert omega_inv_norm(Acl) <= np.linalg.norm(H) * (1 + 1e-12)


def test_log_norm_decay():
    assert log_norm_decay(np.array([[-2.0]])) == pytest.approx(2)
    assert log_norm_decay(np.array([[-1.0, 10], [0, -1]])) == pytest.approx(-4)
    S = -np.diag([1.0, 2.0, 5.0])
    assert log_norm_decay(S) == pytest.approx(1.0)


def test_dense_cap_enforced():
    with pytest.raises(ValueError, match="dense cap"):
        solve_riccati_dense(-np.eye(5), np.ones((5, 1)), np.ones((1, 5)), dense_cap=4)
