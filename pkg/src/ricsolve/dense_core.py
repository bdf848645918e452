"""Dense kernels for small and medium matrices.

Lyapunov solves, the stabilizing Riccati solution through the stable
invariant subspace of the Hamiltonian matrix, and the scalar quantities
(stability margin, closed-loop operator inverse norm, logarithmic-norm decay
rate) consumed by the projection engine and the bound certificates.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la

from .errors import (
    ConvergenceError,
    NotStableError,
    SingularOperatorError,
    StabilizabilityError,
)

logger = logging.getLogger(__name__)

DENSE_CAP = 2000


def symmetrize(M):
    return (M + M.T) / 2


def _check_cap(m, dense_cap):
    if dense_cap is not None and m > dense_cap:
        raise ValueError(f"dense dimension {m} exceeds the dense cap {dense_cap}")


def stability_margin(M) -> float:
    """Largest real part of the eigenvalues of ``M``; ``M`` is stable iff the result is < 0."""
    M = np.asarray(M)
    if M.size == 0:
        return -np.inf
    return float(np.max(la.eigvals(M).real))


def lyapunov_operator_gap(A) -> float:
    """``min |l_i + l_j|`` over eigenvalue pairs of ``A``: distance of the operator to singularity."""
    lam = la.eigvals(A)
    return float(np.min(np.abs(lam[:, None] + lam[None, :])))


def solve_lyapunov_dense(A, Q, check=True, dense_cap=DENSE_CAP):
    """Solve ``A^T X + X A + Q = 0`` for symmetric ``X``.

    Parameters
    ----------
    A
        Stable ``m x m`` matrix.
    Q
        Symmetric ``m x m`` right-hand side.
    check
        Verify (through an eigendecomposition of ``A``) that the Lyapunov
        operator is nonsingular and ``A`` is stable before solving.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    m = A.shape[0]
    _check_cap(m, dense_cap)
    if check:
        lam = la.eigvals(A)
        scale = max(1.0, float(np.max(np.abs(lam))))
        gap = float(np.min(np.abs(lam[:, None] + lam[None, :])))
        if gap <= 1e-13 * scale:
            raise SingularOperatorError(
                f"Lyapunov operator is singular: eigenvalue pair sums to {gap:.3e}"
            )
        if np.max(lam.real) >= 0:
            raise NotStableError(
                f"matrix is not stable (max real eigenvalue part {np.max(lam.real):.3e})"
            )
    # scipy solves a X + X a^H = q
    X = la.solve_continuous_lyapunov(A.T, -Q)
    if not np.all(np.isfinite(X)):
        raise SingularOperatorError("Lyapunov solve produced non-finite entries")
    return symmetrize(X)


def hamiltonian(A, B, C):
    """Assemble ``[[A, -B B^T], [-C^T C, -A^T]]``."""
    A = np.asarray(A, dtype=float)
    G = B @ B.T
    Q = C.T @ C
    return np.block([[A, -G], [-Q, -A.T]])


def riccati_residual(A, B, C, Y):
    """``A^T Y + Y A - Y B B^T Y + C^T C``."""
    YB = Y @ B
    R = A.T @ Y + Y @ A - YB @ YB.T + C.T @ C
    return symmetrize(R)


def _residual_scale(A, B, C, Y):
    ny = np.linalg.norm(Y)
    return (2 * np.linalg.norm(A) * ny + np.linalg.norm(B) ** 2 * ny ** 2
            + np.linalg.norm(C) ** 2)


def _schur_riccati(A, G, Q):
    m = A.shape[0]
    H = np.block([[A, -G], [-Q, -A.T]])
    try:
        _, Z, sdim = la.schur(H, output="real", sort="lhp")
    except (la.LinAlgError, ValueError) as exc:
        raise StabilizabilityError(f"Schur reordering failed: {exc}") from exc
    if sdim != m:
        raise StabilizabilityError(
            f"Hamiltonian has {sdim} stable eigenvalues, expected {m} "
            "(eigenvalues on or near the imaginary axis)"
        )
    U1, U2 = Z[:m, :m], Z[m:, :m]
    if np.linalg.cond(U1) > 1e12:
        raise StabilizabilityError("stable invariant subspace is not a graph: U1 is singular")
    # Y = U2 U1^{-1}
    return symmetrize(la.solve(U1.T, U2.T).T)


def newton_refine(A, B, C, Y, steps=1):
    """Newton-Kleinman steps starting from a stabilizing ``Y``."""
    Q = C.T @ C
    for _ in range(steps):
        K = B.T @ Y
        Acl = A - B @ K
        Y = solve_lyapunov_dense(Acl, Q + K.T @ K, check=False, dense_cap=None)
    return Y


def solve_riccati_dense(A, B, C, tol=1e-10, dense_cap=DENSE_CAP, max_refine=3):
    """Stabilizing solution of ``A^T Y + Y A - Y B B^T Y + C^T C = 0``.

    The data are balanced so that the quadratic and constant terms have
    equal norm, the stable invariant subspace ``[U1; U2]`` of the
    Hamiltonian is obtained from an ordered real Schur form and
    ``Y = U2 U1^{-1}``. If the scaled Frobenius residual exceeds ``tol`` a
    few Newton-Kleinman steps are applied as defect correction. When the
    Schur route fails and ``A`` is stable, Newton-Kleinman from ``Y = 0``
    is used instead.

    Raises
    ------
    StabilizabilityError
        No stabilizing solution could be extracted.
    ConvergenceError
        The residual stayed above ``tol``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m = A.shape[0]
    _check_cap(m, dense_cap)
    G = B @ B.T
    Q = C.T @ C
    nG, nQ = np.linalg.norm(G), np.linalg.norm(Q)
    rho = np.sqrt(nQ / nG) if nG > 0 and nQ > 0 else 1.0

    try:
        Y = rho * _schur_riccati(A, rho * G, Q / rho)
    except StabilizabilityError as exc:
        if stability_margin(A) >= 0:
            raise
        logger.info("Schur route failed (%s); falling back to Newton-Kleinman", exc)
        Y = newton_refine(A, B, C, np.zeros_like(A), steps=1)
        max_refine = max(max_refine, 30)

    def rel_res(Y):
        return np.linalg.norm(riccati_residual(A, B, C, Y)) / max(_residual_scale(A, B, C, Y), 1e-300)

    res = rel_res(Y)
    steps = 0
    while res > tol and steps < max_refine:
        Ynew = newton_refine(A, B, C, Y)
        rnew = rel_res(Ynew)
        steps += 1
        if not rnew < res:
            break
        Y, res = Ynew, rnew
    if res > tol:
        raise ConvergenceError(f"dense Riccati residual {res:.3e} above tolerance {tol:.1e}")
    return Y


def omega_inv_norm(A_cl) -> float:
    """``||H||_2`` with ``A_cl^T H + H A_cl = -I``, the norm of the inverse closed-loop Lyapunov operator."""
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    H = solve_lyapunov_dense(A_cl, np.eye(A_cl.shape[0]), dense_cap=None)
    return float(np.linalg.norm(H, 2))


def log_norm_decay(A_cl) -> float:
    """Negated logarithmic 2-norm: ``-lambda_max((A_cl + A_cl^T)/2)``.

    A positive value ``alpha`` certifies ``||exp(A_cl^T t)|| <= exp(-alpha t)``.
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    return float(-np.linalg.eigvalsh(symmetrize(A_cl)).max())


def controllability_rank(A, B, tol=1e-10) -> int:
    """Numerical rank of ``[B, AB, ..., A^{m-1} B]`` (diagnostic only)."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    m = A.shape[0]
    blocks = [B]
    for _ in range(m - 1):
        nxt = A @ blocks[-1]
        nrm = np.linalg.norm(nxt)
        blocks.append(nxt / nrm if nrm > 0 else nxt)
    K = np.hstack(blocks)
    s = np.linalg.svd(K, compute_uv=False)
    return int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
