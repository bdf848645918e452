"""Run every identity and bound check along one solver trace.

Identities are evaluated at each logged iteration through the solver
callback; bound certificates are evaluated afterwards against a dense
oracle. Everything here assembles ``n x n`` matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dense_core, diagnostics, rksm
from .errors import NotStableError

# Differences below ROUNDOFF_FLOOR * scale are roundoff in the dense assembly; a relative
# comparison at tolerance tol therefore uses max(|reference|, ROUNDOFF_FLOOR * scale / tol)
# as denominator. scale is the size of the individual residual terms.
ROUNDOFF_FLOOR = 1e-14
IDENTITY_TOL = 1e-8
SQRT2_TOL = 1e-10
SPECTRUM_TOL = 1e-6
SPECTRUM_MAX_N = 100


@dataclass
class IdentityCheck:
    name: str
    k: int
    value: float
    tol: float

    @property
    def passed(self):
        return bool(self.value <= self.tol)

    def to_dict(self):
        return {"name": self.name, "k": self.k, "value": float(self.value),
                "tol": self.tol, "passed": self.passed}


@dataclass
class CertifyResult:
    identities: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    solution: object = None
    record: object = None
    skipped: list = field(default_factory=list)
    oracle_rel_error: float = float("nan")

    @property
    def identity_failures(self):
        return [c for c in self.identities if not c.passed]

    @property
    def violations(self):
        return [r for r in self.reports if r.violated]

    @property
    def not_applicable(self):
        return [r for r in self.reports if not r.hypothesis_satisfied]

    @property
    def passed(self):
        return not self.identity_failures and not self.violations

    def to_dict(self):
        return {
            "passed": self.passed,
            "identity_failures": len(self.identity_failures),
            "violations": len(self.violations),
            "not_applicable": len(self.not_applicable),
            "oracle_rel_error": float(self.oracle_rel_error),
            "skipped": self.skipped,
            "identities": [c.to_dict() for c in self.identities],
            "reports": [r.to_dict() for r in self.reports],
        }


def residual_scale(A, B, C, X):
    """Size of the individual terms of the Riccati residual (Frobenius norms)."""
    nX = np.linalg.norm(X)
    return 2 * np.linalg.norm(A) * nX + np.linalg.norm(B) ** 2 * nX ** 2 + np.linalg.norm(C) ** 2


def _rel(a, b, scale, tol=IDENTITY_TOL):
    return abs(a - b) / max(abs(b), ROUNDOFF_FLOOR * scale / tol, np.finfo(float).tiny)


def identity_checks(instance, state, Y, res):
    """Identity checks for one iterate; returns a list of :class:`IdentityCheck`."""
    A, B, C = instance.dense()
    k = state.k
    V = state.V
    X = V @ Y @ V.T
    R = dense_core.riccati_residual(A, B, C, X)
    nR = float(np.linalg.norm(R))
    scale = residual_scale(A, B, C, X)
    a_scale = max(np.linalg.norm(A), 1.0)
    semi = rksm.semi_residual(state, Y)
    out = [
        IdentityCheck("residual_formula_vs_dense", k, _rel(res, nR, scale), IDENTITY_TOL),
        IdentityCheck("residual_sqrt2_semi", k,
                      _rel(res, np.sqrt(2) * np.linalg.norm(semi), scale, SQRT2_TOL), SQRT2_TOL),
        IdentityCheck("galerkin_orthogonality", k,
                      float(np.linalg.norm(V.T @ R @ V)) / max(scale, 1e-300), IDENTITY_TOL),
        IdentityCheck("eigenresidual", k,
                      _rel(diagnostics.eigenresidual(instance, X), res, scale), IDENTITY_TOL),
        IdentityCheck("galerkin_eigen", k,
                      diagnostics.galerkin_eigen_check(state, Y, instance) / max(scale, 1e-300),
                      IDENTITY_TOL),
        IdentityCheck("arnoldi", k, diagnostics.arnoldi_residual(state) / a_scale, IDENTITY_TOL),
        IdentityCheck("closed_loop_arnoldi", k,
                      diagnostics.closed_loop_arnoldi_residual(state, Y)
                      / (a_scale + np.linalg.norm(B) ** 2 * np.linalg.norm(X)), IDENTITY_TOL),
    ]
    mod, fx = diagnostics.modified_riccati_residual(state, Y, instance)
    out.append(IdentityCheck("modified_riccati", k, mod / max(scale, 1e-300), IDENTITY_TOL))
    out.append(IdentityCheck("modified_riccati_fX", k, _rel(np.sqrt(2) * fx, nR, scale),
                             IDENTITY_TOL))
    if instance.n <= SPECTRUM_MAX_N:
        out.append(IdentityCheck("modified_spectrum", k,
                                 diagnostics.modified_spectrum_distance(state, Y, instance),
                                 SPECTRUM_TOL))
    return out


def run_certify(instance, opts=None, x0_seed=0, check_stable=True):
    """Solve ``instance`` and evaluate all identities and bounds along the trace.

    Raises
    ------
    NotStableError
        ``A`` has an eigenvalue with nonnegative real part (with ``check_stable``).
    """
    A, B, C = instance.dense()
    dense_core._check_cap(instance.n, (opts or rksm.SolverOptions()).dense_cap)
    if check_stable:
        margin = dense_core.stability_margin(A)
        if margin >= 0:
            raise NotStableError(f"A is not stable: max Re(eig(A)) = {margin:.6e}")
    opts = opts or rksm.SolverOptions()
    if not opts.keep_iterates:
        opts = rksm.SolverOptions.from_dict({**opts.to_dict(), "keep_iterates": True})
    result = CertifyResult()

    def callback(state, Y, res):
        result.identities.extend(identity_checks(instance, state, Y, res))
        if instance.p == 1:
            Rhat = diagnostics.rational_semi_residual(state, Y, instance)
            if Rhat is None:
                result.skipped.append(f"rational form at k={state.k}: ill-conditioned eigenvectors")
            else:
                semi = rksm.semi_residual(state, Y)
                ref = max(np.linalg.norm(semi), ROUNDOFF_FLOOR / IDENTITY_TOL * residual_scale(
                    A, B, C, state.V @ Y @ state.V.T))
                result.identities.append(IdentityCheck(
                    "rational_semi_residual", state.k,
                    float(np.linalg.norm(Rhat - semi)) / ref, IDENTITY_TOL))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", rksm.DeflationWarning)
        sol, rec, state = rksm.solve_with_state(instance, opts, callback=callback)
    result.solution, result.record = sol, rec

    X = dense_core.solve_riccati_dense(A, B, C)
    result.oracle_rel_error = float(np.linalg.norm(X - sol.dense()) / max(np.linalg.norm(X), 1e-300))
    x0 = np.random.default_rng(x0_seed).standard_normal(instance.n)
    x0 /= np.linalg.norm(x0)
    iterates = rec.iterates
    for d, Yd in iterates:
        Vd = state.V[:, :d]
        Xd = Vd @ Yd @ Vd.T
        result.reports.append(diagnostics.error_bound(instance, X, Xd))
        result.reports.append(diagnostics.stability_perturbation_check(instance, X, Xd))
        result.reports.append(diagnostics.cost_gap_bound(instance, Xd, x0))
    for it_k, it_k1 in zip(iterates, iterates[1:]):
        rep = diagnostics.iterate_gap_bound(instance, state, it_k, it_k1)
        result.reports.append(rep)
        rho, nR = diagnostics.padding_residual_gap(instance, state, it_k, it_k1)
        Vk = state.V[:, :it_k[0]]
        scale = residual_scale(A, B, C, Vk @ it_k[1] @ Vk.T)
        result.identities.append(IdentityCheck(
            "padding_residual", it_k1[0],
            max(rho - nR, 0.0) / max(nR, ROUNDOFF_FLOOR * scale / IDENTITY_TOL, 1e-300),
            IDENTITY_TOL))
    return result
