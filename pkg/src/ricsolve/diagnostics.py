"""Certificates for projection iterates.

Each bound check returns a :class:`BoundReport`. A report whose hypotheses
hold but whose inequality fails is a *violation*; reports whose hypotheses
fail are informative only. The identity checks return plain floats.

All checks assemble dense ``n x n`` matrices and are meant for desk-scale
instances (``n`` up to the dense cap).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

from . import dense_core
from .dense_core import (
    log_norm_decay,
    omega_inv_norm,
    riccati_residual,
    solve_lyapunov_dense,
    stability_margin,
)
from .shifts import closed_loop_matrix

ROUNDOFF = 1e-12


@dataclass
class BoundReport:
    name: str
    hypothesis_satisfied: bool
    left_value: float
    right_value: float
    slack: float = 0.0
    notes: str = ""

    @property
    def margin(self) -> float:
        return self.right_value + self.slack - self.left_value

    @property
    def violated(self) -> bool:
        return bool(self.hypothesis_satisfied and self.left_value > self.right_value + self.slack)

    @property
    def status(self) -> str:
        if not self.hypothesis_satisfied:
            return "n/a"
        return "VIOLATED" if self.violated else "ok"

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.update(margin=self.margin, violated=self.violated, status=self.status)
        return {k: (float(v) if isinstance(v, (np.floating, np.integer)) else v)
                for k, v in d.items()}


def reports_to_json(reports, path=None):
    text = json.dumps([r.to_dict() for r in reports], indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def reports_to_csv(reports, path=None):
    lines = ["name,status,hypothesis_satisfied,left_value,right_value,slack,margin"]
    for r in reports:
        lines.append(f"{r.name},{r.status},{int(r.hypothesis_satisfied)},{r.left_value!r},"
                     f"{r.right_value!r},{r.slack!r},{r.margin!r}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _as_dense(X):
    return X.dense() if hasattr(X, "dense") else np.asarray(X)


def _norm2(M):
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


# --------------------------------------------------------------------------
# bounds


def cost_gap_bound(instance, X_k, x0) -> BoundReport:
    """Compare the LQR cost of the feedback ``u = -B^T X_k x`` with ``x0^T X_k x0``.

    The cost is ``x0^T P x0`` where ``P`` solves the closed-loop Lyapunov
    equation with right-hand side ``X_k B B^T X_k + C^T C``. The bound
    ``||R_k|| x0^T x0 / (2 alpha)`` uses the logarithmic-norm decay rate
    ``alpha`` of the closed loop and is only claimed when ``alpha > 0``.
    """
    A, B, C = instance.dense()
    X = _as_dense(X_k)
    x0 = np.asarray(x0, dtype=float).ravel()
    Acl = A - B @ (B.T @ X)
    margin = stability_margin(Acl)
    if margin >= 0:
        return BoundReport("cost_gap", False, np.nan, np.nan,
                           notes=f"closed loop not stable (margin {margin:.3e})")
    K = B.T @ X
    P = solve_lyapunov_dense(Acl, K.T @ K + C.T @ C, check=False, dense_cap=None)
    J = float(x0 @ P @ x0)
    J_hat = float(x0 @ X @ x0)
    R = riccati_residual(A, B, C, X)
    alpha = log_norm_decay(Acl)
    x0x0 = float(x0 @ x0)
    left = abs(J - J_hat)
    slack = ROUNDOFF * max(abs(J), abs(J_hat), 1e-300) * 1e3
    if alpha <= 0:
        return BoundReport("cost_gap", False, left, np.inf, slack,
                           notes=f"log-norm decay alpha = {alpha:.3e} does not certify decay")
    right = _norm2(R) / (2 * alpha) * x0x0
    return BoundReport("cost_gap", True, left, right, slack,
                       notes=f"J={J:.6e} J_hat={J_hat:.6e} alpha={alpha:.3e} "
                             f"||R||_F={np.linalg.norm(R):.3e}")


def error_bound(instance, X_oracle, X_k) -> BoundReport:
    """``||X - X_k|| <= 2 ||Omega_X^{-1}|| ||R_k||`` under its two hypotheses (2-norms).

    The slack accounts for the inaccuracy of the oracle itself, bounded by
    the same estimate applied to the oracle residual.
    """
    A, B, C = instance.dense()
    X = np.asarray(X_oracle)
    Xk = _as_dense(X_k)
    om = omega_inv_norm(A - B @ (B.T @ X))
    nb2 = _norm2(B) ** 2
    err = _norm2(X - Xk)
    Rk = _norm2(riccati_residual(A, B, C, Xk))
    R_or = _norm2(riccati_residual(A, B, C, X))
    hyp1 = err < 1 / (3 * nb2 * om) if nb2 > 0 else True
    hyp2 = 4 * nb2 * om ** 2 * Rk < 1
    slack = 2 * om * R_or + ROUNDOFF * max(_norm2(X), 1.0)
    return BoundReport("error_bound", bool(hyp1 and hyp2), err, 2 * om * Rk, slack,
                       notes=f"||Omega^-1||={om:.3e} ||B||^2={nb2:.3e} ||R_k||_2={Rk:.3e} "
                             f"hyp_err={hyp1} hyp_res={hyp2}")


def stability_perturbation_check(instance, X_oracle, X_k) -> BoundReport:
    """If ``||B B^T (X - X_k)|| < 1/(2 ||Omega_X^{-1}||)`` then ``A - B B^T X_k`` is stable.

    ``left_value`` is the closed-loop stability margin (must be < 0);
    ``right_value`` is 0.
    """
    A, B, C = instance.dense()
    X = np.asarray(X_oracle)
    Xk = _as_dense(X_k)
    om = omega_inv_norm(A - B @ (B.T @ X))
    pert = _norm2(B @ (B.T @ (X - Xk)))
    premise = pert < 1 / (2 * om)
    margin = stability_margin(A - B @ (B.T @ Xk))
    # strict inequality: a margin of exactly 0 is a violation
    return BoundReport("stability_perturbation", bool(premise), margin, -np.finfo(float).tiny,
                       notes=f"||BB^T E||={pert:.3e} 1/(2||Omega^-1||)={1 / (2 * om):.3e}")


def _slice_state(state, d):
    return state.V[:, :d], state.T[:d, :d], state.Bk[:d], state.Ck[:, :d]


def iterate_gap_bound(instance, state, iterate_k, iterate_k1) -> BoundReport:
    """``||X_{k+1} - X_k|| <= 2 ||Omega_{Y_{k+1}}^{-1}|| ||R_k||`` between consecutive iterates.

    ``iterate_k`` and ``iterate_k1`` are ``(dim, Y)`` pairs taken from the
    same run (nested bases); ``state`` is that run's final state. The
    hypotheses are those of the error bound applied to the reduced problem
    of step ``k+1`` with ``Y_k`` padded by zeros.
    """
    A, B, C = instance.dense()
    dk, Yk = iterate_k
    dk1, Yk1 = iterate_k1
    Vk = state.V[:, :dk]
    _, T1, B1, C1 = _slice_state(state, dk1)
    Ypad = np.zeros((dk1, dk1))
    Ypad[:dk, :dk] = Yk
    rho = riccati_residual(T1, B1, C1, Ypad)
    Xk = Vk @ Yk @ Vk.T
    Rk = riccati_residual(A, B, C, Xk)
    nR, nrho = _norm2(Rk), _norm2(rho)
    om = omega_inv_norm(closed_loop_matrix(T1, B1, Yk1))
    nb2 = _norm2(B1) ** 2
    gap = _norm2(Yk1 - Ypad)
    hyp1 = gap < 1 / (3 * nb2 * om) if nb2 > 0 else True
    hyp2 = nrho <= 1 / (4 * nb2 * om ** 2) if nb2 > 0 else True
    padding_ok = nrho <= nR * (1 + 1e-8) + ROUNDOFF
    slack = ROUNDOFF * max(_norm2(Yk1), 1.0) + 2 * om * _norm2(riccati_residual(T1, B1, C1, Yk1))
    return BoundReport("iterate_gap", bool(hyp1 and hyp2), gap, 2 * om * nR, slack,
                       notes=f"dims {dk}->{dk1} ||rho||={nrho:.3e} ||R_k||={nR:.3e} "
                             f"padding_identity={'ok' if padding_ok else 'FAILED'}")


def padding_residual_gap(instance, state, iterate_k, iterate_k1):
    """Return ``(||rho_k||, ||R_k||)``; the padded reduced residual never exceeds ``||R_k||``."""
    A, B, C = instance.dense()
    dk, Yk = iterate_k
    dk1, _ = iterate_k1
    _, T1, B1, C1 = _slice_state(state, dk1)
    Ypad = np.zeros((dk1, dk1))
    Ypad[:dk, :dk] = Yk
    Vk = state.V[:, :dk]
    return (_norm2(riccati_residual(T1, B1, C1, Ypad)),
            _norm2(riccati_residual(A, B, C, Vk @ Yk @ Vk.T)))


# --------------------------------------------------------------------------
# identities


def eigenresidual(instance, X_k, check=True) -> float:
    """``||H [I; X_k] - [I; X_k] (A - B B^T X_k)||_F``, equal to ``||R_k||_F``.

    The top block vanishes identically; with ``check`` this is asserted.
    """
    A, B, C = instance.dense()
    X = _as_dense(X_k)
    n = A.shape[0]
    L = A - B @ (B.T @ X)
    if n <= dense_core.DENSE_CAP:
        H = dense_core.hamiltonian(A, B, C)
        basis = np.vstack([np.eye(n), X])
        S = H @ basis - basis @ L
    else:
        top = A - B @ (B.T @ X) - L
        bottom = -(C.T @ C) - A.T @ X - X @ L
        S = np.vstack([top, bottom])
    if check:
        top_norm = np.linalg.norm(S[:n])
        scale = np.linalg.norm(A) + np.linalg.norm(B) ** 2 * np.linalg.norm(X)
        assert top_norm <= 1e-10 * max(scale, 1.0), f"top block of eigenresidual is {top_norm:.3e}"
    return float(np.linalg.norm(S))


def galerkin_eigen_check(state, Y, instance) -> float:
    """``||blockdiag(V, V)^T S_k||_F`` for the eigenbasis ``[V; V Y]`` of the Hamiltonian."""
    A, B, C = instance.dense()
    V = state.V[:, :Y.shape[0]]
    _, T, Bk, Ck = _slice_state(state, Y.shape[0])
    Tcl = closed_loop_matrix(T, Bk, Y)
    VY = V @ Y
    top = A @ V - B @ (B.T @ VY) - V @ Tcl
    bottom = -C.T @ (C @ V) - A.T @ VY - VY @ Tcl
    return float(np.sqrt(np.linalg.norm(V.T @ top) ** 2 + np.linalg.norm(V.T @ bottom) ** 2))


def arnoldi_residual(state) -> float:
    """``||A^T V - V T^T - vhat g^T||_F``."""
    AtV = np.asarray(state.AT @ state.V)
    return float(np.linalg.norm(AtV - state.V @ state.T.T - state.vhat @ state.g.T))


def closed_loop_arnoldi_residual(state, Y) -> float:
    """``||(A^T - X_k B B^T) V - V Tcl^T - vhat g^T||_F`` with ``Tcl = T - B_k B_k^T Y``."""
    V = state.V
    AtV = np.asarray(state.AT @ V)
    XkBBtV = V @ (Y @ (state.Bk @ (state.B.T @ V)))
    Tcl = closed_loop_matrix(state.T, state.Bk, Y)
    return float(np.linalg.norm(AtV - XkBBtV - V @ Tcl.T - state.vhat @ state.g.T))


def modified_riccati_residual(state, Y, instance):
    """Residual of ``X_k`` in the Riccati equation with ``A`` replaced by ``A - f vhat^T``.

    Returns ``(||modified residual||_F, ||f^T X_k||_F)`` with ``f = V g``; the
    first vanishes and the second equals ``||R_k||_F / sqrt(2)``.
    """
    A, B, C = instance.dense()
    V = state.V
    X = V @ Y @ V.T
    f = V @ state.g
    Amod = A - f @ state.vhat.T
    res = riccati_residual(Amod, B, C, X)
    return float(np.linalg.norm(res)), float(np.linalg.norm(f.T @ X))


def modified_spectrum_distance(state, Y, instance) -> float:
    """Largest distance from an eigenvalue of ``T^T - Y B_k B_k^T`` to the spectrum of
    ``A^T - X_k B B^T - vhat f^T``.
    """
    A, B, C = instance.dense()
    V = state.V
    X = V @ Y @ V.T
    f = V @ state.g
    M = A.T - X @ B @ B.T - state.vhat @ f.T
    big = la.eigvals(M)
    small = la.eigvals(state.T.T - Y @ state.Bk @ state.Bk.T)
    return float(max(np.min(np.abs(big - lam)) for lam in small))


def rational_semi_residual(state, Y, instance, cond_limit=1e8):
    """Semi-residual rebuilt from ``psi(A^T) c c^T V psi(-Tcl)^{-1}`` for ``p = 1``.

    ``psi(z) = det(z I - T) / prod_j (z - s_j)`` over the finite shifts
    (a conjugate pair counts as two poles). Returns ``None`` when the
    eigenvector matrix of ``Tcl`` has condition number above ``cond_limit``.
    """
    A, B, C = instance.dense()
    if C.shape[0] != 1:
        raise ValueError("the rational form is implemented for a single output (p = 1)")
    n = A.shape[0]
    theta = la.eigvals(state.T)
    poles = [s for s, w in zip(state.shifts, state.pole_weights) if np.isfinite(s) and w > 0]
    Tcl = closed_loop_matrix(state.T, state.Bk, Y)
    lam, Q = la.eig(Tcl)
    if np.linalg.cond(Q) > cond_limit:
        return None

    def psi_scalar(z):
        return np.prod(z - theta) / np.prod([z - s for s in poles]) if poles else np.prod(z - theta)

    At = A.T.astype(complex)
    M = np.eye(n, dtype=complex)
    for th in theta:
        M = At @ M - th * M
    for s in poles:
        M = la.solve(At - s * np.eye(n), M)
    c = C.T
    lhs = M @ c @ (c.T @ state.V)
    scale = np.array([psi_scalar(-l) for l in lam])
    Rhat = (lhs @ Q) / scale[None, :] @ la.inv(Q)
    return Rhat


# --------------------------------------------------------------------------
# convergence-rate estimate


def gamma_rate(c: float) -> float:
    """Asymptotic error-rate bound for a field of values inside the unit-radius disk centered at ``c > 1``."""
    if not c > 1:
        raise ValueError(f"disk center must exceed 1, got {c}")
    r = np.sqrt(c * c - 1)
    return float((2 * c * c + c - 1 - (2 * c + 1) * r) / (c + 1 + r))


def field_of_values_boundary(M, n_angles=180):
    """Boundary points of the field of values of ``M`` (rotated Hermitian-part method)."""
    M = np.asarray(M, dtype=complex)
    pts = []
    for th in np.linspace(0, 2 * np.pi, n_angles, endpoint=False):
        R = np.exp(1j * th) * M
        w, U = la.eigh((R + R.conj().T) / 2)
        x = U[:, -1]
        pts.append(x.conj() @ M @ x)
    return np.array(pts)


def real_center_enclosing_disk(points):
    """Smallest disk with center on the real axis containing ``points``: ``(center, radius)``."""
    pts = np.asarray(points)
    lo, hi = pts.real.min(), pts.real.max()
    res = minimize_scalar(lambda c: np.max(np.abs(pts - c)), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.x), float(np.max(np.abs(pts - res.x)))


def fit_rate(values, first=None):
    """Geometric rate ``exp(slope)`` of a least-squares line through ``log(values)``."""
    v = np.asarray(values, dtype=float)
    if first is not None:
        v = v[:first]
    k = np.arange(v.size)
    slope = np.polyfit(k, np.log(v), 1)[0]
    return float(np.exp(slope))
