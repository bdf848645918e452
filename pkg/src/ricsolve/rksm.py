"""Galerkin projection onto block rational Krylov subspaces.

The basis ``V`` spans ``K_k(A^T, C^T, s)``, generated from ``C^T`` (the
infinite first pole) followed by shifted solves with ``A^T - s_j I``. At
every step the reduced equation

    T^T Y + Y T - Y B_k B_k^T Y + C_k^T C_k = 0,   T = V^T A V,

is solved densely, and the residual norm of ``X_k = V Y V^T`` is read off the
rank-structured factorization ``A^T V = V T^T + vhat g^T``:

    ||R_k||_F = sqrt(2) ||Y g||_F.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from . import dense_core
from .errors import FormulaInvalidError, RicsolveError, SingularOperatorError
from .problem_io import AREInstance
from .shifts import (
    MODES,
    RationalNodeSet,
    closed_loop_matrix,
    eigs_for_mode,
    next_shift,
    spectral_region,
)

logger = logging.getLogger(__name__)

DEFLATION_TOL = 1e-10
FACTOR_RANK_TOL = 1e-12
REDUCED_RES_GUARD = 1e-8


class DeflationWarning(UserWarning):
    """Basis directions were dropped as numerically dependent."""


class StabilityWarning(UserWarning):
    """A projected matrix expected to be stable is not."""


@dataclass
class SolverOptions:
    """Options for :func:`solve`.

    ``shift_mode`` is ``"t"`` (region from the eigenvalues of ``T_k``),
    ``"closed_loop"`` (from ``T_k - B_k B_k^T Y_k``) or ``"fixed"`` (cycle
    through ``fixed_shifts``).
    """

    tol: float = 1e-9
    tol_mode: str = "abs"
    max_dim: int = 300
    shift_mode: str = "closed_loop"
    fixed_shifts: list | None = None
    history_union: bool = False
    stride: int = 1
    dense_oracle: bool = False
    dense_cap: int = dense_core.DENSE_CAP
    keep_iterates: bool = False

    def __post_init__(self):
        if self.tol_mode not in ("abs", "rel"):
            raise ValueError(f"tol_mode must be 'abs' or 'rel', got {self.tol_mode!r}")
        if self.shift_mode not in (*MODES, "fixed"):
            raise ValueError(f"unknown shift_mode {self.shift_mode!r}")
        if self.shift_mode == "fixed" and not self.fixed_shifts:
            raise ValueError("shift_mode 'fixed' needs a nonempty fixed_shifts list")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def to_dict(self):
        d = dataclasses.asdict(self)
        if d["fixed_shifts"] is not None:
            d["fixed_shifts"] = [[complex(s).real, complex(s).imag] for s in d["fixed_shifts"]]
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown solver option(s): {sorted(unknown)}")
        d = dict(d)
        if d.get("fixed_shifts") is not None:
            d["fixed_shifts"] = [complex(*s) if isinstance(s, (list, tuple)) else complex(s)
                                 for s in d["fixed_shifts"]]
        return cls(**d)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass
class RksmState:
    """Evolving projection state.

    Invariants maintained by :func:`initialize` and :func:`expand`:
    ``V`` has orthonormal columns, ``W = A^T V``, ``T = V^T A V``,
    ``Bk = V^T B``, ``Ck = C V`` and ``A^T V = V T^T + vhat g^T`` with
    ``vhat`` orthonormal and orthogonal to ``V``.
    """

    A: sps.csr_matrix
    AT: sps.csc_matrix
    B: np.ndarray
    C: np.ndarray
    V: np.ndarray
    W: np.ndarray
    T: np.ndarray
    Bk: np.ndarray
    Ck: np.ndarray
    p_eff: int
    shifts: list = field(default_factory=list)
    pole_weights: list = field(default_factory=list)
    vhat: np.ndarray | None = None
    g: np.ndarray | None = None
    k: int = 1
    last_block: slice = slice(0, 0)
    _lu_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.V.shape[0]

    @property
    def dim(self):
        return self.V.shape[1]

    def nodes(self, zeros):
        return RationalNodeSet(np.array(self.shifts, dtype=complex), zeros,
                               np.array(self.pole_weights, dtype=float))


@dataclass
class LowRankSolution:
    """Factored approximation ``X = V Y V^T``."""

    V: np.ndarray
    Y: np.ndarray
    residual_norm: float
    converged: bool = False
    shifts: list = field(default_factory=list)
    iterations: int = 0

    def dense(self):
        return self.V @ self.Y @ self.V.T

    def factor(self):
        """``Z`` with ``X = Z Z^T`` (negative roundoff eigenvalues of ``Y`` dropped)."""
        lam, U = np.linalg.eigh(self.Y)
        keep = lam > 0
        return self.V @ (U[:, keep] * np.sqrt(lam[keep]))


@dataclass
class IterationLog:
    k: int
    dim: int
    shift: complex
    res_norm: float
    time_s: float
    eig_t: np.ndarray
    eig_cl: np.ndarray
    region: dict | None = None


@dataclass
class ConvergenceRecord:
    rows: list = field(default_factory=list)
    iterates: list = field(default_factory=list)  # (dim, Y) pairs when keep_iterates
    converged: bool = False
    breakdown: bool = False
    meta: dict = field(default_factory=dict)

    def append(self, row: IterationLog):
        if self.rows:
            assert row.k > self.rows[-1].k and row.dim >= self.rows[-1].dim
        self.rows.append(row)

    @property
    def iterations(self):
        return self.rows[-1].k if self.rows else 0

    @property
    def final_dim(self):
        return self.rows[-1].dim if self.rows else 0

    @property
    def final_residual(self):
        return self.rows[-1].res_norm if self.rows else np.inf

    def residuals(self):
        return np.array([r.res_norm for r in self.rows])

    def to_csv(self, path=None, timings=True):
        lines = ["k,dim,shift_re,shift_im,res_norm,time_s"]
        for r in self.rows:
            s = complex(r.shift)
            lines.append(",".join([
                str(r.k), str(r.dim), repr(float(s.real)), repr(float(s.imag)),
                repr(float(r.res_norm)), repr(float(r.time_s)) if timings else "0.0"]))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_json_dict(self, timings=True):
        def cplx(z):
            return [[float(x.real), float(x.imag)] for x in np.atleast_1d(z)]
        return {
            "converged": self.converged,
            "breakdown": self.breakdown,
            "iterations": self.iterations,
            "final_dim": self.final_dim,
            "final_residual": float(self.final_residual),
            "meta": self.meta,
            "rows": [{
                "k": r.k, "dim": r.dim,
                "shift": [float(complex(r.shift).real), float(complex(r.shift).imag)],
                "res_norm": float(r.res_norm),
                "time_s": float(r.time_s) if timings else 0.0,
                "eig_t": cplx(r.eig_t), "eig_closed_loop": cplx(r.eig_cl),
                "region": r.region,
            } for r in self.rows],
        }


# --------------------------------------------------------------------------
# basis construction


def _orthonormalize_into(V, X, tol=DEFLATION_TOL):
    """Append the columns of ``X`` to orthonormal ``V`` with two Gram-Schmidt passes.

    Returns the new columns (possibly fewer than ``X`` has) as an array.
    """
    accepted = []
    for x in X.T:
        x = np.array(x, dtype=float)
        n0 = np.linalg.norm(x)
        if n0 == 0:
            continue
        for _ in range(2):
            x -= V @ (V.T @ x)
            for q in accepted:
                x -= q * (q @ x)
        nx = np.linalg.norm(x)
        if nx <= tol * n0:
            continue
        accepted.append(x / nx)
    if not accepted:
        return np.zeros((V.shape[0], 0))
    return np.column_stack(accepted)


def _update_residual_factor(state):
    """Factor ``A^T V - V T^T = vhat g^T`` with rank at most ``p_eff``."""
    F = state.W - state.V @ state.T.T
    # one more projection sweep against roundoff in V^T F
    F -= state.V @ (state.V.T @ F)
    Qf, Rf = la.qr(F, mode="economic")
    U, s, Wt = la.svd(Rf)
    # below this F is roundoff, e.g. once V spans the whole space
    noise = FACTOR_RANK_TOL * max(np.linalg.norm(state.W), np.finfo(float).tiny)
    if s.size == 0 or s[0] <= noise:
        r = 0
    else:
        r = int(min(np.sum(s > max(FACTOR_RANK_TOL * np.linalg.norm(s), noise)), state.p_eff))
    state.vhat = Qf @ U[:, :r]
    state.g = (s[:r, None] * Wt[:r]).T
    if s.size > r and s[r] > max(1e-6 * s[0], noise):
        logger.warning("residual factor has numerical rank above %d (sigma_%d/sigma_1 = %.2e)",
                       r, r + 1, s[r] / s[0])


def initialize(instance: AREInstance) -> RksmState:
    """Start the space with an orthonormal basis of ``C^T`` (the infinite pole)."""
    C = instance.C
    if not np.any(C):
        raise ValueError("C must be nonzero")
    Q, R, piv = la.qr(C.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-12 * diag[0]))
    if rank < C.shape[0]:
        warnings.warn(f"C has numerical rank {rank} < p = {C.shape[0]}; deflating",
                      DeflationWarning, stacklevel=2)
    V = Q[:, :rank].copy()
    AT = instance.A.T.tocsc()
    W = np.asarray(AT @ V)
    state = RksmState(
        A=instance.A, AT=AT, B=instance.B, C=C, V=V, W=W,
        T=W.T @ V, Bk=V.T @ instance.B, Ck=C @ V, p_eff=rank,
        shifts=[np.inf], pole_weights=[0.0], k=1, last_block=slice(0, rank),
    )
    _update_residual_factor(state)
    return state


def _shifted_solve(state, shift, rhs):
    key = complex(shift)
    lu = state._lu_cache.get(key)
    if lu is None:
        n = state.n
        dtype = complex if key.imag != 0 else float
        M = (state.AT - (key if dtype is complex else key.real) * sps.identity(n, format="csc"))
        lu = spla.splu(M.astype(dtype).tocsc())
        state._lu_cache[key] = lu
    rhs = rhs.astype(complex) if key.imag != 0 else rhs
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularOperatorError(f"shifted solve with s = {shift} produced non-finite values")
    return x


def expand(state: RksmState, shift) -> RksmState:
    """Add the block ``(A^T - s I)^{-1} v_last`` to the basis (in place; also returned).

    A complex shift contributes the real and imaginary parts of the solve,
    so the basis stays real and the conjugate shift is implicitly included.
    Returns the state; ``state.last_block`` is empty when the whole block
    deflated.
    """
    shift = complex(shift)
    if not shift.real > 0:
        raise ValueError(f"shift must have positive real part, got {shift}")
    rhs = state.V[:, state.last_block]
    try:
        X = _shifted_solve(state, shift, rhs)
    except (RuntimeError, SingularOperatorError):
        shift = shift + 1e-8 * (1 + abs(shift))
        logger.warning("shifted matrix singular; retrying with perturbed shift %s", shift)
        try:
            X = _shifted_solve(state, shift, rhs)
        except RuntimeError as exc:
            raise SingularOperatorError(f"shifted solve failed at s = {shift}: {exc}") from exc

    if shift.imag != 0:
        X = np.hstack([X.real, X.imag])
        new_poles = [shift, shift.conjugate()]
    else:
        X = X.real
        new_poles = [shift]

    Vn = _orthonormalize_into(state.V, X)
    added = Vn.shape[1]
    if added < X.shape[1]:
        warnings.warn(f"deflation: {X.shape[1] - added} of {X.shape[1]} new directions dropped",
                      DeflationWarning, stacklevel=2)
    weight = added / len(new_poles)
    state.shifts.extend(new_poles)
    state.pole_weights.extend([weight] * len(new_poles))
    state.k += 1
    d = state.dim
    if added == 0:
        state.last_block = slice(d, d)
        return state

    Wn = np.asarray(state.AT @ Vn)
    # T = W^T V, extended by the new block rows and columns
    T = np.empty((d + added, d + added))
    T[:d, :d] = state.T
    T[:d, d:] = state.W.T @ Vn
    T[d:, :d] = Wn.T @ state.V
    T[d:, d:] = Wn.T @ Vn
    state.V = np.hstack([state.V, Vn])
    state.W = np.hstack([state.W, Wn])
    state.T = T
    state.Bk = np.vstack([state.Bk, Vn.T @ state.B])
    state.Ck = np.hstack([state.Ck, state.C @ Vn])
    state.last_block = slice(d + added - min(added, state.p_eff), d + added)
    _update_residual_factor(state)
    return state


# --------------------------------------------------------------------------
# reduced problem and residuals


def solve_reduced(state: RksmState) -> np.ndarray:
    """Stabilizing solution of the projected Riccati equation."""
    if dense_core.stability_margin(state.T) >= 0:
        warnings.warn("projected matrix T_k is not stable", StabilityWarning, stacklevel=2)
    return dense_core.solve_riccati_dense(state.T, state.Bk, state.Ck, dense_cap=None)


def reduced_residual(state: RksmState, Y) -> np.ndarray:
    return dense_core.riccati_residual(state.T, state.Bk, state.Ck, Y)


def _dense_residual_norm(state, Y):
    X = state.V @ Y @ state.V.T
    return float(np.linalg.norm(dense_core.riccati_residual(state.A.toarray(), state.B, state.C, X)))


def residual_norm(state: RksmState, Y, dense_cap=dense_core.DENSE_CAP) -> float:
    """``||R_k||_F = sqrt(2) ||Y g||_F`` without forming ``R_k``.

    The formula needs ``Y`` to solve the reduced equation; when its reduced
    residual is too large the explicit residual is assembled instead (only
    for ``n <= dense_cap``, otherwise :class:`FormulaInvalidError`).
    """
    rr = np.linalg.norm(reduced_residual(state, Y))
    scale = (2 * np.linalg.norm(state.T) * np.linalg.norm(Y)
             + np.linalg.norm(state.Bk) ** 2 * np.linalg.norm(Y) ** 2
             + np.linalg.norm(state.Ck) ** 2)
    if rr > REDUCED_RES_GUARD * max(scale, 1e-300):
        if state.n <= dense_cap:
            logger.info("reduced residual %.2e too large for the cheap formula; "
                        "assembling R_k", rr)
            return _dense_residual_norm(state, Y)
        raise FormulaInvalidError(f"reduced residual {rr:.3e} invalidates the residual formula")
    if state.g is None or state.g.size == 0:
        return 0.0
    return float(np.sqrt(2.0) * np.linalg.norm(Y @ state.g))


def semi_residual(state: RksmState, Y) -> np.ndarray:
    """``A^T V Y + V Y (T - B_k B_k^T Y) + C^T (C V)``, an ``n x d`` factor of ``R_k``."""
    Tcl = closed_loop_matrix(state.T, state.Bk, Y)
    return state.W @ Y + state.V @ (Y @ Tcl) + state.C.T @ state.Ck


# --------------------------------------------------------------------------
# driver


def _pad(Y, d):
    out = np.zeros((d, d))
    out[:Y.shape[0], :Y.shape[1]] = Y
    return out


def _threshold(instance, opts):
    if opts.tol_mode == "abs":
        return opts.tol
    # ||C^T C||_F == ||C C^T||_F
    return opts.tol * np.linalg.norm(instance.C @ instance.C.T)


def solve(instance: AREInstance, opts: SolverOptions | None = None):
    """Run the projection method until the residual drops below the tolerance.

    Returns
    -------
    solution : LowRankSolution
        Best (last) iterate; ``converged`` is False when ``max_dim`` stopped the run.
    record : ConvergenceRecord
        One row per iteration with dimension, shift, residual norm, spectra and timing.
    """
    sol, record, _ = solve_with_state(instance, opts)
    return sol, record


def solve_with_state(instance: AREInstance, opts: SolverOptions | None = None, callback=None):
    """Like :func:`solve` but also returns the final :class:`RksmState`.

    ``callback(state, Y, res)`` is invoked after every reduced solve.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    thresh = _threshold(instance, opts)
    record = ConvergenceRecord(meta={"instance": instance.describe(), "options": opts.to_dict(),
                                     "threshold": thresh})
    try:
        state = initialize(instance)
        Y = solve_reduced(state)
        res = residual_norm(state, Y, opts.dense_cap)
    except RicsolveError as exc:
        raise type(exc)(f"iteration 1: {exc}") from exc

    def log(shift, region):
        eig_t = np.linalg.eigvals(state.T)
        eig_cl = np.linalg.eigvals(closed_loop_matrix(state.T, state.Bk, Y))
        record.append(IterationLog(state.k, state.dim, shift, res,
                                   time.perf_counter() - t0, eig_t, eig_cl, region))
        if callback is not None:
            callback(state, Y, res)
        if opts.keep_iterates:
            record.iterates.append((state.dim, Y.copy()))

    log(np.inf, None)
    history = []
    fixed_idx = 0
    Y_last = Y
    while res > thresh and state.dim < opts.max_dim:
        if opts.shift_mode == "fixed":
            s = complex(opts.fixed_shifts[fixed_idx % len(opts.fixed_shifts)])
            fixed_idx += 1
            region = None
        else:
            Ysel = _pad(Y_last, state.dim)
            eigs = eigs_for_mode(state, Ysel, opts.shift_mode)
            reg = spectral_region(eigs, history if opts.history_union else None)
            history.append(reg)
            s = next_shift(reg, state.nodes(eigs))
            region = reg.to_dict()
        try:
            expand(state, s)
        except RicsolveError as exc:
            raise type(exc)(f"iteration {state.k + 1}: {exc}") from exc
        if state.last_block.stop == state.last_block.start:
            record.breakdown = True
            logger.warning("basis did not grow at iteration %d; stopping", state.k)
            break
        if (state.k - 1) % opts.stride == 0 or state.dim >= opts.max_dim:
            try:
                Y = solve_reduced(state)
                res = residual_norm(state, Y, opts.dense_cap)
            except RicsolveError as exc:
                raise type(exc)(f"iteration {state.k}: {exc}") from exc
            Y_last = Y
            log(s, region)
    if Y.shape[0] != state.dim:
        Y = solve_reduced(state)
        res = residual_norm(state, Y, opts.dense_cap)
        log(s, region)
    record.converged = bool(res <= thresh)
    sol = LowRankSolution(state.V, Y, res, record.converged, list(state.shifts), state.k)
    record.meta["wall_time_s"] = time.perf_counter() - t0
    return sol, record, state
